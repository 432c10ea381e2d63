"""Entropic balanced/unbalanced transport and the multi-cost barycenter.

All solvers are generalized Sinkhorn scaling iterations on a Gibbs kernel,
stabilized by periodically absorbing the scaling vectors into the kernel
exponent so that small regularization does not underflow the scalings.

Objective conventions. The plan entropy is the plain h(P) = sum P log P
(`entropy`), and the marginal penalties reported by the unbalanced solver are
the mass-corrected divergences D(x|y) = sum_{y_i>0} (x_i log(x_i/y_i) - x_i +
y_i). D is a true divergence (nonnegative, zero iff x = y on Supp(y)), which
is what makes lambda_u -> infinity recover the balanced problem and makes
deleting mass carry a positive penalty. The plain-entropy convention shifts
the optimal plan by a constant factor exp(-1), which the solver folds into
its kernel internally and into the returned v, so the returned scalings
always satisfy P = diag(u) K diag(v) against the caller's kernel.
`objective_unbalanced` is the literal four-term readout built from `entropy`
and `kl_divergence` (support-restricted KL without mass correction);
`solver_objective` is the objective the unbalanced solver actually minimizes
and reports as `value`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cost import CostMatrix, KernelMatrix
from .grid import GridImage

_SAMPLE_EVERY = 10  # iteration period for objective diagnostics
# log-domain guards: absorb early once residual scalings drift this far from
# 1, and cap the rebuilt kernel exponent (any entry needing e^690 is a
# transient; converged plan entries are bounded by the total mass)
_EAGER_ABSORB_LOG = 200.0
_EXP_CLAMP = 690.0
# cap on |log| of returned scalings: keeps u, v finite positive doubles when
# the true potentials at far-tail pixels exceed the double range; the plan
# entries affected carry less than ~e^-100 mass
_POT_CLAMP = 500.0


@dataclass(frozen=True)
class SolverConfig:
    """Regularization and iteration controls shared by every solver.

    lam is the entropic regularization; lam_u the marginal relaxation
    strength (math.inf means hard marginals, i.e. balanced); tol is the
    convergence threshold on the sup-norm log-change of the scaling vectors
    (of the barycenter iterate for `barycenter`); stabilize_every is the
    log-domain absorption period.
    """

    lam: float
    lam_u: float = 1.0
    max_iters: int = 5000
    tol: float = 1e-6
    stabilize_every: int = 10

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.lam_u > 0:
            raise ValueError("lam_u must be positive (math.inf for balanced)")
        if self.max_iters < 1 or self.stabilize_every < 1:
            raise ValueError("max_iters and stabilize_every must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class TransportResult:
    """Scaling vectors, implied plan, objective value, and diagnostics.

    The plan is diag(u) K diag(v) against the kernel passed to the solver;
    marginal_gap holds the sup-norm deviations of (P1, P^T 1) from (mu, nu).
    objective_samples records (iteration, objective) every few iterations.
    """

    u: np.ndarray
    v: np.ndarray
    value: float
    iterations: int
    converged: bool
    marginal_gap: tuple[float, float]
    plan: np.ndarray | None = None
    objective_samples: list[tuple[int, float]] = field(default_factory=list)


@dataclass
class BarycenterResult:
    """The averaged raster plus per-image transport diagnostics."""

    g_bar: np.ndarray
    per_image: list[TransportResult]
    iterations: int
    converged: bool
    objective_samples: list[tuple[int, float]] = field(default_factory=list)


def entropy(x: np.ndarray) -> float:
    """Discrete entropy sum x_i log x_i with the 0 log 0 = 0 convention."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if np.any(x < 0):
        raise ValueError("entropy requires nonnegative entries")
    pos = x > 0
    return float(np.sum(x[pos] * np.log(x[pos])))


def kl_divergence(x: np.ndarray, y: np.ndarray) -> float:
    """Sum over Supp(y) of x_i log(x_i / y_i), skipping entries with y_i = 0."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError("kl_divergence requires equal-length vectors")
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("kl_divergence requires nonnegative entries")
    sup = (y > 0) & (x > 0)
    return float(np.sum(x[sup] * np.log(x[sup] / y[sup])))


def _mass_kl(x: np.ndarray, y: np.ndarray) -> float:
    """Mass-corrected divergence sum_{y_i>0} (x log(x/y) - x + y); >= 0."""
    sup = y > 0
    xs, ys = x[sup], y[sup]
    pos = xs > 0
    val = float(np.sum(xs[pos] * np.log(xs[pos] / ys[pos])))
    return val + float(np.sum(ys) - np.sum(xs))


def objective_unbalanced(
    P: np.ndarray,
    C: CostMatrix,
    mu: np.ndarray,
    nu: np.ndarray,
    lam: float,
    lam_u: float,
) -> float:
    """Literal four-term readout Tr(C^T P) + lam h(P) + lam_u KL(P1|mu) + lam_u KL(P^T1|nu).

    Uses `entropy` and `kl_divergence` exactly as defined (plain forms). The
    unbalanced solver minimizes `solver_objective`, which differs by the
    mass-correction terms of the marginal penalties.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.shape != C.entries.shape:
        raise ValueError("plan and cost shapes disagree")
    if np.any(P < 0):
        raise ValueError("plan entries must be nonnegative")
    val = float(np.sum(C.entries * P)) + lam * entropy(P)
    val += lam_u * kl_divergence(P.sum(axis=1), mu)
    val += lam_u * kl_divergence(P.sum(axis=0), nu)
    return val


def solver_objective(
    P: np.ndarray,
    C: CostMatrix,
    mu: np.ndarray,
    nu: np.ndarray,
    lam: float,
    lam_u: float,
) -> float:
    """The objective the unbalanced solver minimizes and reports as value.

    Tr(C^T P) + lam h(P) + lam_u D(P1|mu) + lam_u D(P^T1|nu) with the
    mass-corrected divergence D; strictly convex with a unique minimizer.
    """
    P = np.asarray(P, dtype=np.float64)
    val = float(np.sum(C.entries * P)) + lam * entropy(P)
    val += lam_u * _mass_kl(P.sum(axis=1), np.asarray(mu, dtype=np.float64).ravel())
    val += lam_u * _mass_kl(P.sum(axis=0), np.asarray(nu, dtype=np.float64).ravel())
    return val


def _require_dense(K: KernelMatrix, cfg: SolverConfig) -> CostMatrix:
    if K.cost is None or K.entries is None:
        raise ValueError("solvers need a dense kernel built by kernel_from_cost")
    if abs(K.lam - cfg.lam) > 1e-12 * max(K.lam, cfg.lam):
        raise ValueError(
            f"config lam={cfg.lam} does not match the kernel's lam={K.lam}"
        )
    return K.cost


def _guarded_ratio(num: np.ndarray, den: np.ndarray, active: np.ndarray) -> np.ndarray:
    """num/den where active and den > 0, else 0 (dead mass is deleted)."""
    out = np.zeros_like(num)
    ok = active & (den > 0)
    out[ok] = num[ok] / den[ok]
    return out


def _log_or_ninf(x: np.ndarray) -> np.ndarray:
    out = np.full(x.shape, -np.inf)
    pos = x > 0
    out[pos] = np.log(x[pos])
    return out


def _fold(pot: np.ndarray, resid: np.ndarray, lam: float, shift: float = 0.0) -> np.ndarray:
    """Combine absorbed potential and residual scaling into one finite vector."""
    out = np.zeros_like(resid)
    pos = resid > 0
    ex = pot[pos] / lam + np.log(resid[pos]) - shift
    out[pos] = np.exp(np.clip(ex, -_POT_CLAMP, _POT_CLAMP))
    return out


def _rebuild(S0: np.ndarray, alpha: np.ndarray, beta: np.ndarray, lam: float) -> np.ndarray:
    E = S0 + alpha[:, None] / lam + beta[None, :] / lam
    return np.exp(np.minimum(E, _EXP_CLAMP, out=E), out=E)


def _max_abs_log(x: np.ndarray) -> float:
    pos = x[x > 0]
    if pos.size == 0:
        return 0.0
    return float(np.max(np.abs(np.log(pos))))


def _sup_log_change(cur: np.ndarray, prev: np.ndarray) -> float:
    """Sup |cur - prev| over entries finite in either; support flips count as inf."""
    both = np.isfinite(cur) & np.isfinite(prev)
    flip = np.isfinite(cur) != np.isfinite(prev)
    if np.any(flip):
        return np.inf
    if not np.any(both):
        return 0.0
    return float(np.max(np.abs(cur[both] - prev[both])))


def _pair_value(
    P: np.ndarray,
    C_entries: np.ndarray,
    mu: np.ndarray,
    nu: np.ndarray,
    lam: float,
    lam_u: float | None,
) -> float:
    val = float(np.sum(C_entries * P)) + lam * entropy(P)
    if lam_u is not None and math.isfinite(lam_u):
        val += lam_u * (_mass_kl(P.sum(axis=1), mu) + _mass_kl(P.sum(axis=0), nu))
    return val


def _scaling_solve(
    mu: np.ndarray,
    nu: np.ndarray,
    K: KernelMatrix,
    cfg: SolverConfig,
    balanced: bool,
) -> TransportResult:
    C = _require_dense(K, cfg)
    lam = cfg.lam
    lam_u = cfg.lam_u
    if balanced:
        f, shift = 1.0, 0.0
        pot_decay = np.inf  # exp(-alpha/pot_decay) = 1: no damping in balanced updates
    else:
        f, shift = lam_u / (lam_u + lam), 1.0
        pot_decay = lam + lam_u

    n2 = K.n2
    S0 = C.entries / -lam - shift
    alpha = np.zeros(n2)
    beta = np.zeros(n2)
    u = np.ones(n2)
    v = np.ones(n2)
    M = np.exp(S0)
    act_mu = mu > 0
    act_nu = nu > 0
    lu_prev = np.where(act_mu, 0.0, -np.inf)
    lv_prev = np.where(act_nu, 0.0, -np.inf)
    samples: list[tuple[int, float]] = []
    converged = False
    it = 0
    stuck_warned = False

    for it in range(1, cfg.max_iters + 1):
        Mv = M @ v
        if not stuck_warned and np.any(act_mu & (Mv == 0)):
            warnings.warn(
                "kernel support does not reach some source mass; treating it as deleted",
                RuntimeWarning,
                stacklevel=3,
            )
            stuck_warned = True
        u = _guarded_ratio(mu, Mv, act_mu) ** f
        if not balanced:
            u *= np.exp(alpha / -pot_decay)
        Mtu = M.T @ u
        v = _guarded_ratio(nu, Mtu, act_nu) ** f
        if not balanced:
            v *= np.exp(beta / -pot_decay)

        lu = alpha / lam + _log_or_ninf(u)
        lv = beta / lam + _log_or_ninf(v)
        err = max(_sup_log_change(lu, lu_prev), _sup_log_change(lv, lv_prev))
        lu_prev, lv_prev = lu, lv

        if it % _SAMPLE_EVERY == 0:
            P = M * u[:, None] * v[None, :]
            samples.append(
                (it, _pair_value(P, C.entries, mu, nu, lam, None if balanced else lam_u))
            )
        if err < cfg.tol:
            converged = True
            break
        if it % cfg.stabilize_every == 0 or max(
            _max_abs_log(u), _max_abs_log(v)
        ) > _EAGER_ABSORB_LOG:
            # absorb scalings into the kernel exponent to keep them near 1;
            # resets stay zero off-support so dead entries never re-enter sums
            pos_u, pos_v = u > 0, v > 0
            alpha[pos_u] += lam * np.log(u[pos_u])
            beta[pos_v] += lam * np.log(v[pos_v])
            M = _rebuild(S0, alpha, beta, lam)
            u = act_mu.astype(np.float64)
            v = act_nu.astype(np.float64)

    P = M * u[:, None] * v[None, :]
    r, c = P.sum(axis=1), P.sum(axis=0)
    gap = (float(np.max(np.abs(r - mu))), float(np.max(np.abs(c - nu))))
    value = _pair_value(P, C.entries, mu, nu, lam, None if balanced else lam_u)
    u_ret = _fold(alpha, u, lam)
    v_ret = _fold(beta, v, lam, shift=shift)
    return TransportResult(
        u=u_ret,
        v=v_ret,
        value=value,
        iterations=it,
        converged=converged,
        marginal_gap=gap,
        plan=P,
        objective_samples=samples,
    )


def _validated_marginal(x: np.ndarray, K: KernelMatrix, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != K.n2:
        raise ValueError(f"{name} has length {x.size}, kernel side is {K.n2}")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite and nonnegative")
    return x


def sinkhorn_balanced(
    mu: np.ndarray, nu: np.ndarray, K: KernelMatrix, cfg: SolverConfig
) -> TransportResult:
    """Entropic transport with hard marginals via u <- mu/(Kv), v <- nu/(K^T u).

    Requires matching total masses. Hitting the iteration limit returns
    converged=False rather than raising. value is Tr(C^T P) + lam h(P).
    """
    mu = _validated_marginal(mu, K, "mu")
    nu = _validated_marginal(nu, K, "nu")
    mm, mn = float(mu.sum()), float(nu.sum())
    if mm <= 0 or mn <= 0:
        raise ValueError("balanced transport needs positive total mass on both sides")
    if abs(mm - mn) > 1e-9 * mm:
        raise ValueError(f"total masses differ: {mm} vs {mn}")
    return _scaling_solve(mu, nu, K, cfg, balanced=True)


def sinkhorn_unbalanced(
    mu: np.ndarray, nu: np.ndarray, K: KernelMatrix, cfg: SolverConfig
) -> TransportResult:
    """Marginal-relaxed transport via u <- (mu/Kv)^f, v <- (nu/K^T u)^f.

    f = lam_u/(lam_u + lam). value is the four-term `solver_objective`
    (mass-corrected marginal penalties), which this iteration minimizes.
    """
    mu = _validated_marginal(mu, K, "mu")
    nu = _validated_marginal(nu, K, "nu")
    if not math.isfinite(cfg.lam_u):
        raise ValueError("lam_u must be finite here; use sinkhorn_balanced for hard marginals")
    if mu.sum() == 0 and nu.sum() == 0:
        raise ValueError("both marginals are zero")
    return _scaling_solve(mu, nu, K, cfg, balanced=False)


def barycenter(
    images: list[GridImage],
    kernels: list[KernelMatrix],
    weights: list[float] | None = None,
    cfg: SolverConfig | None = None,
) -> BarycenterResult:
    """Unbalanced barycenter of N images under per-image Gibbs kernels.

    Minimizes sum_k w_k W_u(g^(k), g) over g, where each W_u uses its own
    kernel (the per-image cost extension: wind-biased costs differ per frame).
    Masked pixels enter as zeros and are handled by the marginal relaxation.
    Generalized scaling iterations: u_k <- (g^(k) / K^(k) v_k)^f, then the
    shared iterate g <- (sum_k w_k (K^(k)T u_k)^(1-f))^(1/(1-f)) (the
    weight-geometric mean in the f -> 1 balanced limit) and v_k <- (g /
    K^(k)T u_k)^f, until the sup-norm log-change of g drops below tol.
    """
    if cfg is None:
        raise ValueError("cfg is required")
    if not images:
        raise ValueError("need at least one image")
    N = len(images)
    n = images[0].n
    if any(img.n != n for img in images):
        raise ValueError("all images must share the same side length")
    if len(kernels) != N:
        raise ValueError(f"{N} images but {len(kernels)} kernels")
    costs = [_require_dense(K, cfg) for K in kernels]
    if weights is None:
        w = np.full(N, 1.0 / N)
    else:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.size != N or np.any(w < 0):
            raise ValueError("weights must be N nonnegative reals")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {w.sum()}, expected 1")

    lam = cfg.lam
    lam_u = cfg.lam_u
    balanced = not math.isfinite(lam_u)
    f = 1.0 if balanced else lam_u / (lam_u + lam)
    shift = 0.0 if balanced else 1.0
    pot_decay = np.inf if balanced else lam + lam_u
    n2 = n * n

    # shared-cost kernels reuse one exponent array
    s0_cache: dict[int, np.ndarray] = {}
    S0 = []
    for K in kernels:
        key = id(K.entries)
        if key not in s0_cache:
            s0_cache[key] = K.cost.entries / -lam - shift  # type: ignore[union-attr]
        S0.append(s0_cache[key])
    M = [np.exp(s) for s in S0]
    g_data = [img.values for img in images]
    act = [gk > 0 for gk in g_data]
    alpha = [np.zeros(n2) for _ in range(N)]
    beta = [np.zeros(n2) for _ in range(N)]
    u = [np.ones(n2) for _ in range(N)]
    v = [np.ones(n2) for _ in range(N)]
    g = np.zeros(n2)
    lg_prev = np.full(n2, -np.inf)
    samples: list[tuple[int, float]] = []
    converged = False
    it = 0

    for it in range(1, cfg.max_iters + 1):
        log_a = np.empty((N, n2))
        for k in range(N):
            Mv = M[k] @ v[k]
            u[k] = _guarded_ratio(g_data[k], Mv, act[k]) ** f
            if not balanced:
                u[k] *= np.exp(alpha[k] / -pot_decay)
            Mtu = M[k].T @ u[k]
            # full (absorption-independent) K^T u for the shared-iterate mean
            log_a[k] = _log_or_ninf(Mtu) - beta[k] / lam

        if balanced:
            lg = log_a.T @ w  # weight-geometric mean; -inf propagates to g = 0
        else:
            t = (1.0 - f) * log_a
            T = t.max(axis=0)
            with np.errstate(divide="ignore"):
                body = np.where(np.isfinite(t), np.exp(t - T[None, :]), 0.0)
                lg = (np.log(body.T @ w) + T) / (1.0 - f)
            lg[~np.isfinite(T)] = -np.inf
        g = np.where(np.isfinite(lg), np.exp(lg), 0.0)

        for k in range(N):
            with np.errstate(invalid="ignore", over="ignore"):
                lv = f * (lg - log_a[k]) - beta[k] / lam
            vk = np.zeros(n2)
            ok = np.isfinite(lg) & np.isfinite(log_a[k])
            vk[ok] = np.exp(lv[ok])
            v[k] = vk

        err = _sup_log_change(lg, lg_prev)
        lg_prev = lg

        if it % _SAMPLE_EVERY == 0:
            total = 0.0
            for k in range(N):
                P = M[k] * u[k][:, None] * v[k][None, :]
                total += w[k] * _pair_value(
                    P, costs[k].entries, g_data[k], g, lam, None if balanced else lam_u
                )
            samples.append((it, total))
        if err < cfg.tol and it > 1:
            converged = True
            break
        if it % cfg.stabilize_every == 0 or any(
            max(_max_abs_log(u[k]), _max_abs_log(v[k])) > _EAGER_ABSORB_LOG
            for k in range(N)
        ):
            g_act = (g > 0).astype(np.float64)
            for k in range(N):
                pos_u, pos_v = u[k] > 0, v[k] > 0
                alpha[k][pos_u] += lam * np.log(u[k][pos_u])
                beta[k][pos_v] += lam * np.log(v[k][pos_v])
                M[k] = _rebuild(S0[k], alpha[k], beta[k], lam)
                u[k] = act[k].astype(np.float64)
                v[k] = g_act.copy()

    per_image: list[TransportResult] = []
    for k in range(N):
        P = M[k] * u[k][:, None] * v[k][None, :]
        r, c = P.sum(axis=1), P.sum(axis=0)
        gap = (float(np.max(np.abs(r - g_data[k]))), float(np.max(np.abs(c - g))))
        value = _pair_value(
            P, costs[k].entries, g_data[k], g, lam, None if balanced else lam_u
        )
        u_ret = _fold(alpha[k], u[k], lam)
        v_ret = _fold(beta[k], v[k], lam, shift=shift)
        per_image.append(
            TransportResult(
                u=u_ret,
                v=v_ret,
                value=value,
                iterations=it,
                converged=converged,
                marginal_gap=gap,
                plan=None,
            )
        )
    return BarycenterResult(
        g_bar=g,
        per_image=per_image,
        iterations=it,
        converged=converged,
        objective_samples=samples,
    )
