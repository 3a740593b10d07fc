import numpy as np
import torch


def central_difference_grad(loss_fn, param: torch.Tensor, step: float = 1e-4,
                            indices: list[int] | None = None) -> torch.Tensor:
    """Central finite differences of a scalar loss w.r.t. selected entries."""
    flat = param.detach().reshape(-1)
    idx = list(range(flat.numel())) if indices is None else list(indices)
    grad = torch.zeros(len(idx), dtype=param.dtype)
    with torch.no_grad():
        for out_i, i in enumerate(idx):
            orig = float(flat[i])
            flat[i] = orig + step
            hi = float(loss_fn())
            flat[i] = orig - step
            lo = float(loss_fn())
            flat[i] = orig
            grad[out_i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(a: torch.Tensor, b: torch.Tensor) -> float:
    a = a.detach().reshape(-1)
    b = b.detach().reshape(-1)
    denom = max(float(a.norm()), float(b.norm()), 1e-12)
    return float((a - b).norm()) / denom


def assert_grads_match(loss_fn, params: dict[str, torch.Tensor],
                       step: float = 1e-4, tol: float = 1e-3,
                       sample: int | None = None, seed: int = 0) -> None:
    """Autograd vs central differences for every named parameter."""
    loss = loss_fn()
    grads = torch.autograd.grad(loss, list(params.values()), allow_unused=False)
    rng = np.random.default_rng(seed)
    for (name, param), grad in zip(params.items(), grads):
        n = param.numel()
        if sample is not None and n > sample:
            indices = sorted(rng.choice(n, size=sample, replace=False).tolist())
        else:
            indices = list(range(n))
        fd = central_difference_grad(loss_fn, param, step=step, indices=indices)
        ad = grad.detach().reshape(-1)[indices]
        err = relative_error(ad, fd)
        assert err <= tol, f"gradient mismatch for {name}: rel err {err:.2e}"
