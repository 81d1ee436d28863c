"""Monte Carlo estimators for electronic time correlation functions.

Every estimator targets matrix elements of the Heisenberg-propagated
projector pair,

    Tr[|n><m| U^dagger(t) |k><l| U(t)],

as a phase space average  estimate(t) = (1/Cbar(t)) <Qbar_{nm,kl}(X_0; X_t)>
with the F-factor measure convention (the uniform probability average on
each sphere or Stiefel component times F).  Method families differ in how
Qbar separates into a density-side factor at X_0 and an observable-side
factor at X_t:

  cc  cmm, wmm, cmmcv           both factors are covariant kernels
  cx  cornered_simplex          covariant density, diagonal window observable
  xc  triangle_sqc, ehrenfest,  sampler-realized density kernel,
      lambda_point, dtwa, gdtwa   covariant observable kernel
  ww  triangle_ww,              nonnegative window pairs with the
      triangle_f2_single,         time-dependent ratio normalization
      hill_ww                     Cbar(t) = sum_k <Qbar_{nn,kk}>

The cc/cx/xc families have constant normalization Cbar = 1; the ww
families divide by the summed-window denominator accumulated over the
same trajectory set, which makes sum_m P(n->m, t) = 1 up to float
rounding and keeps every per-trajectory contribution nonnegative.

Trajectories are generated in 100 fixed blocks.  Block b draws from
Generator(Philox(SeedSequence(seed, spawn_key=(b,)))), blocks double as
jackknife resampling units for the standard errors, and the reduction
over blocks runs in a fixed order, so results are bitwise reproducible
for a given (seed, n_traj) regardless of the worker thread count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cps import GammaWeight, gdtwa_signature, sample_sphere_batch
from .dynamics import _rk4_arrays
from .kernels import gdtwa_points
from .qcore import hermitian_eig, propagator_from_decomposition, require_hermitian

N_BLOCKS = 100

_CC_FAMILIES = ("cmm", "wmm", "cmmcv")
_CX_FAMILIES = ("cornered_simplex",)
_XC_FAMILIES = ("triangle_sqc", "ehrenfest", "lambda_point", "dtwa", "gdtwa")
_WW_FAMILIES = ("triangle_ww", "triangle_f2_single", "hill_ww")
_FAMILIES = _CC_FAMILIES + _CX_FAMILIES + _XC_FAMILIES + _WW_FAMILIES


def hill_exponent(F):
    """Exponent B(F) of the hill window, 3/(7(F-1)) + 60/(7(F+13))."""
    return 3.0 / (7.0 * (F - 1)) + 60.0 / (7.0 * (F + 13))


@dataclass(frozen=True, eq=False)
class MethodSpec:
    """A TCF method family with its role parameters.

    gamma is the sphere parameter where the family uses a single sphere;
    weight is a GammaWeight for the weighted families; components holds
    the (weight, Gamma-matrix) pairs of the cmmcv comb; obs_gamma picks
    the observable-kernel gamma of triangle_sqc ("shell" follows the
    sampled sphere, "third" fixes 1/3).
    """

    family: str
    gamma: float = None
    weight: GammaWeight = None
    components: tuple = None
    obs_gamma: str = "shell"

    @staticmethod
    def cmm(gamma):
        return MethodSpec("cmm", gamma=float(gamma))

    @staticmethod
    def wmm(weight):
        if not isinstance(weight, GammaWeight):
            raise ValueError("wmm needs a GammaWeight")
        return MethodSpec("wmm", weight=weight)

    @staticmethod
    def cmmcv(components):
        comps = []
        for w, G in components:
            G = np.asarray(G, dtype=np.complex128)
            require_hermitian(G)
            comps.append((float(w), G))
        if not comps:
            raise ValueError("cmmcv needs at least one (weight, Gamma) component")
        return MethodSpec("cmmcv", components=tuple(comps))

    @staticmethod
    def cornered_simplex(gamma):
        if gamma <= 0:
            raise ValueError("cornered_simplex requires gamma > 0")
        return MethodSpec("cornered_simplex", gamma=float(gamma))

    @staticmethod
    def triangle_sqc(obs_gamma="shell"):
        if obs_gamma not in ("shell", "third"):
            raise ValueError("obs_gamma must be 'shell' or 'third'")
        return MethodSpec("triangle_sqc", obs_gamma=obs_gamma)

    @staticmethod
    def ehrenfest():
        return MethodSpec("ehrenfest", gamma=0.0)

    @staticmethod
    def lambda_point(gamma):
        if gamma <= 0:
            raise ValueError("lambda_point requires gamma > 0")
        return MethodSpec("lambda_point", gamma=float(gamma))

    @staticmethod
    def dtwa():
        return MethodSpec("dtwa")

    @staticmethod
    def gdtwa():
        return MethodSpec("gdtwa")

    @staticmethod
    def triangle_ww():
        return MethodSpec("triangle_ww")

    @staticmethod
    def triangle_f2_single(gamma=0.0):
        if gamma < 0:
            raise ValueError("triangle_f2_single requires gamma >= 0")
        return MethodSpec("triangle_f2_single", gamma=float(gamma))

    @staticmethod
    def hill_ww(gamma=0.0):
        if gamma < 0:
            raise ValueError("hill_ww requires gamma >= 0")
        return MethodSpec("hill_ww", gamma=float(gamma))


@dataclass
class TCFRequest:
    """One correlation function to estimate.

    rho_indices = (n, m) selects rho = |n><m|, obs_indices = (k, l)
    selects A = |k><l|, both 1-based.  backend is "exact" (matrix
    exponential between grid times) or "rk4" (sign-factor equations of
    motion with step <= dt).
    """

    hamiltonian: np.ndarray
    rho_indices: tuple
    obs_indices: tuple
    t_grid: np.ndarray
    n_traj: int
    seed: int
    method: MethodSpec
    backend: str = "exact"
    dt: float = 1e-3
    n_threads: int = 1


@dataclass
class TCFResult:
    """Estimates on the time grid with jackknife standard errors.

    normalization holds Cbar(t) (all ones for the constant-normalization
    families); min_numerator records the smallest per-trajectory
    numerator contribution seen by a ww estimate (nan otherwise).
    """

    t_grid: np.ndarray
    estimates: np.ndarray
    normalization: np.ndarray
    standard_errors: np.ndarray
    n_traj: int
    min_numerator: float = math.nan


# ---------------------------------------------------------------------------
# blocks, RNG streams, jackknife


def _block_sizes(n_traj):
    base, extra = divmod(n_traj, N_BLOCKS)
    return np.array([base + (1 if b < extra else 0) for b in range(N_BLOCKS)])


def _block_rng(seed, block):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _jackknife_mean(block_sums, sizes, n_traj):
    """SE of sums/n_traj from leave-one-block-out estimates."""
    total = np.sum(block_sums, axis=0)
    live = sizes > 0
    B = int(np.count_nonzero(live))
    if B < 2:
        return np.full(total.shape, np.nan)
    theta = (total[None, :] - block_sums[live]) / (n_traj - sizes[live])[:, None]
    return _jackknife_spread(theta, B)


def _jackknife_ratio(num_blocks, den_blocks, num_total, den_total, sizes):
    live = sizes > 0
    B = int(np.count_nonzero(live))
    if B < 2:
        return np.full(num_total.shape, np.nan)
    den_loo = den_total[None, :] - den_blocks[live]
    den_loo = np.where(den_loo == 0.0, np.nan, den_loo)
    theta = (num_total[None, :] - num_blocks[live]) / den_loo
    return _jackknife_spread(theta, B)


def _jackknife_spread(theta, B):
    mean = np.mean(theta, axis=0)
    dev = theta - mean[None, :]
    var = (B - 1) / B * np.sum(dev.real**2 + dev.imag**2, axis=0)
    return np.sqrt(var)


# ---------------------------------------------------------------------------
# request validation


def _prepare(req):
    H = require_hermitian(req.hamiltonian)
    F = H.shape[0]
    n, m = req.rho_indices
    k, l = req.obs_indices
    for name, idx in (("rho", n), ("rho", m), ("obs", k), ("obs", l)):
        if not (isinstance(idx, (int, np.integer)) and 1 <= idx <= F):
            raise ValueError(f"{name} index {idx} outside 1..{F}")
    if req.n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    t_grid = np.asarray(req.t_grid, dtype=np.float64)
    if t_grid.size < 1 or t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be nonempty, nonnegative, strictly increasing")
    if req.backend not in ("exact", "rk4"):
        raise ValueError(f"unknown backend {req.backend!r}")
    if req.dt <= 0:
        raise ValueError("dt must be positive")
    method = req.method
    fam = method.family
    if fam not in _FAMILIES:
        raise ValueError(f"unknown method family {fam!r}")
    if fam == "cmm" and method.gamma <= -1.0 / F:
        raise ValueError(f"cmm gamma must exceed -1/F = {-1.0 / F}")
    if fam == "wmm":
        method.weight.validate()
        moment = method.weight.moment(lambda g: F * g * g + 2.0 * g)
        if abs(moment - 1.0) > 1e-6:
            raise ValueError(
                "wmm weight violates the exact mapping condition: "
                f"integral of w(gamma)(F gamma^2 + 2 gamma) is {moment!r}, expected 1"
            )
        lo = method.weight.support[0]
        if lo <= -1.0 / F:
            raise ValueError(f"wmm weight support reaches gamma <= -1/F = {-1.0 / F}")
    if fam == "cmmcv":
        for _, G in method.components:
            if G.shape[0] != F:
                raise ValueError(f"cmmcv Gamma dimension {G.shape[0]} does not match F={F}")
            if np.real(np.trace(G)) <= -1.0:
                raise ValueError("cmmcv component needs Tr Gamma > -1 for a real sphere radius")
    if fam == "dtwa" and F != 2:
        raise ValueError("dtwa is the F=2 method; use gdtwa for F >= 3")
    if fam == "triangle_sqc" and method.obs_gamma not in ("shell", "third"):
        raise ValueError("obs_gamma must be 'shell' or 'third'")
    if fam == "triangle_f2_single" and F != 2:
        raise ValueError("triangle_f2_single is defined for F = 2 only")
    if fam == "cornered_simplex" and k != l:
        raise ValueError("cornered_simplex supports population observables only (k = l)")
    if fam in _WW_FAMILIES and (n != m or k != l):
        raise ValueError(
            "window-window families estimate population-population "
            "correlation functions only (n = m and k = l)"
        )
    return H, F, t_grid, (n - 1, m - 1, k - 1, l - 1)


# ---------------------------------------------------------------------------
# shared propagation inside a block


def _propagators(H, t_grid):
    dec = hermitian_eig(H)
    return [propagator_from_decomposition(dec, t).matrix for t in t_grid]


def _block_series(rng, nb, sampler, evaluate, width, dtype, req, H, t_grid, signs, prop):
    """Sample one block, march it over the grid, return per-time sums."""
    Z0, aux = sampler(rng, nb)
    out = np.zeros((t_grid.size, width), dtype=dtype)
    if req.backend == "exact":
        for ti, U in enumerate(prop):
            out[ti] = evaluate(np.matmul(Z0, U.T), aux)
    else:
        x = Z0.real.copy()
        p = Z0.imag.copy()
        prev = 0.0
        for ti, t in enumerate(t_grid):
            span = t - prev
            if span > 0:
                steps = max(1, int(np.ceil(span / req.dt)))
                x, p = _rk4_arrays(x, p, signs, H, span / steps, steps)
            out[ti] = evaluate(x + 1j * p, aux)
            prev = t
    return out


def _run_blocks(req, H, t_grid, sampler, evaluate, width, dtype, signs):
    sizes = _block_sizes(req.n_traj)
    prop = _propagators(H, t_grid) if req.backend == "exact" else None
    sums = np.zeros((N_BLOCKS, t_grid.size, width), dtype=dtype)

    def work(b):
        rng = _block_rng(req.seed, b)
        sums[b] = _block_series(
            rng, int(sizes[b]), sampler, evaluate, width, dtype, req, H, t_grid, signs, prop
        )

    blocks = [b for b in range(N_BLOCKS) if sizes[b] > 0]
    if req.n_threads > 1:
        with ThreadPoolExecutor(max_workers=req.n_threads) as pool:
            list(pool.map(work, blocks))
    else:
        for b in blocks:
            work(b)
    return sums, sizes


def _mean_result(req, t_grid, sums, sizes):
    total = np.sum(sums[:, :, 0], axis=0)
    estimates = total / req.n_traj
    se = _jackknife_mean(sums[:, :, 0], sizes, req.n_traj)
    return TCFResult(t_grid, estimates, np.ones(t_grid.size), se, req.n_traj)


# ---------------------------------------------------------------------------
# covariant-kernel entry helpers (single-frame batches)


def _kernel_entry(Z, row, col, gamma):
    """[(1/2) z z^dagger - gamma I]_{row,col} for a (nb, 1, F) batch."""
    val = 0.5 * Z[:, 0, row] * np.conj(Z[:, 0, col])
    if row == col:
        val = val - gamma
    return val


def _actions(Z):
    """(nb, F) actions of a single-frame batch."""
    return 0.5 * (np.abs(Z[:, 0, :]) ** 2)


# ---------------------------------------------------------------------------
# cc family


def estimate_tcf_cc(req):
    """Estimate a TCF with the covariant-covariant families."""
    if req.method.family not in _CC_FAMILIES:
        raise ValueError(f"{req.method.family!r} is not a cc family")
    H, F, t_grid, (n0, m0, k0, l0) = _prepare(req)
    fam = req.method.family
    if fam == "cmmcv":
        return _estimate_cmmcv(req, H, F, t_grid, (n0, m0, k0, l0))

    if fam == "cmm":
        g = req.method.gamma
        c1 = (1.0 + F) / (2.0 * (1.0 + F * g) ** 2)
        c2 = (1.0 - g) / (1.0 + F * g)

        def sampler(rng, nb):
            Z = sample_sphere_batch(F, g, rng, nb)[:, None, :]
            W = F * _kernel_entry(Z, m0, n0, g)
            return Z, W

        def evaluate(Zt, W):
            val = c1 * Zt[:, 0, l0] * np.conj(Zt[:, 0, k0])
            if l0 == k0:
                val = val - c2
            return np.sum(W * val)

    else:
        weight = req.method.weight
        tot = weight.abs_total()

        def sampler(rng, nb):
            gam, sgn = weight.sample_batch(rng, nb)
            w = rng.standard_normal((nb, F)) + 1j * rng.standard_normal((nb, F))
            norms = np.linalg.norm(w, axis=1)
            norms[norms == 0.0] = 1.0
            radius = np.sqrt(2.0 * (1.0 + F * gam))
            Z = (w * (radius / norms)[:, None])[:, None, :]
            W = 0.5 * Z[:, 0, m0] * np.conj(Z[:, 0, n0])
            if m0 == n0:
                W = W - gam
            W = W * (F * tot * sgn)
            return Z, (W, gam)

        def evaluate(Zt, aux):
            W, gam = aux
            val = 0.5 * Zt[:, 0, l0] * np.conj(Zt[:, 0, k0])
            if l0 == k0:
                val = val - gam
            return np.sum(W * val)

    sums, sizes = _run_blocks(req, H, t_grid, sampler, evaluate, 1, np.complex128, np.ones(1))
    return _mean_result(req, t_grid, sums, sizes)


def _estimate_cmmcv(req, H, F, t_grid, idx):
    """cmmcv: self-dual Gamma-comb kernels, K = (1/2) z z^dagger - Gamma.

    The exact backend evolves the kernel matrix covariantly.  The rk4
    backend decomposes each kernel into its full eigenframe set at
    gamma = 0 (frames sqrt(2|lambda_i|) v_i with signs sgn(lambda_i)),
    integrates the sign-factor equations, and rebuilds the kernel.
    """
    n0, m0, k0, l0 = idx
    comps = req.method.components
    weights = np.array([w for w, _ in comps])
    gammas_mats = [G for _, G in comps]
    tot = float(np.sum(np.abs(weights)))
    probs = np.abs(weights) / tot
    comp_signs = np.sign(weights)
    comp_signs[comp_signs == 0] = 1.0
    radii = np.array([math.sqrt(2.0 * (1.0 + float(np.real(np.trace(G))))) for G in gammas_mats])
    gstack = np.stack(gammas_mats)

    def sampler(rng, nb):
        ci = rng.choice(len(comps), size=nb, p=probs)
        w = rng.standard_normal((nb, F)) + 1j * rng.standard_normal((nb, F))
        norms = np.linalg.norm(w, axis=1)
        norms[norms == 0.0] = 1.0
        z = w * (radii[ci] / norms)[:, None]
        K0 = 0.5 * z[:, :, None] * np.conj(z[:, None, :]) - gstack[ci]
        W = (F * tot * comp_signs[ci]) * K0[:, m0, n0]
        if req.backend == "exact":
            return K0, W
        lam, vec = np.linalg.eigh(K0)
        frames = np.sqrt(2.0 * np.abs(lam))[:, :, None] * np.swapaxes(vec, 1, 2)
        signs = np.sign(lam)
        return frames, (W, signs)

    if req.backend == "exact":

        def evaluate_exact(Kt_entry, W):
            return np.sum(W * Kt_entry)

        sizes = _block_sizes(req.n_traj)
        prop = _propagators(H, t_grid)
        sums = np.zeros((N_BLOCKS, t_grid.size, 1), dtype=np.complex128)

        def work(b):
            rng = _block_rng(req.seed, b)
            K0, W = sampler(rng, int(sizes[b]))
            for ti, U in enumerate(prop):
                entry = np.einsum("b,nbc,c->n", U[l0], K0, np.conj(U[k0]))
                sums[b, ti, 0] = evaluate_exact(entry, W)

        blocks = [b for b in range(N_BLOCKS) if sizes[b] > 0]
        if req.n_threads > 1:
            with ThreadPoolExecutor(max_workers=req.n_threads) as pool:
                list(pool.map(work, blocks))
        else:
            for b in blocks:
                work(b)
        return _mean_result(req, t_grid, sums, sizes)

    def evaluate(Zt, aux):
        W, signs = aux
        val = np.einsum("nr,nr,nr->n", 0.5 * signs, Zt[:, :, l0], np.conj(Zt[:, :, k0]))
        return np.sum(W * val)

    sizes = _block_sizes(req.n_traj)
    sums = np.zeros((N_BLOCKS, t_grid.size, 1), dtype=np.complex128)

    def work(b):
        rng = _block_rng(req.seed, b)
        frames, (W, signs) = sampler(rng, int(sizes[b]))
        x = frames.real.copy()
        p = frames.imag.copy()
        prev = 0.0
        for ti, t in enumerate(t_grid):
            span = t - prev
            if span > 0:
                steps = max(1, int(np.ceil(span / req.dt)))
                x, p = _rk4_arrays(x, p, signs, H, span / steps, steps)
            sums[b, ti, 0] = evaluate(x + 1j * p, (W, signs))
            prev = t

    blocks = [b for b in range(N_BLOCKS) if sizes[b] > 0]
    if req.n_threads > 1:
        with ThreadPoolExecutor(max_workers=req.n_threads) as pool:
            list(pool.map(work, blocks))
    else:
        for b in blocks:
            work(b)
    return _mean_result(req, t_grid, sums, sizes)


# ---------------------------------------------------------------------------
# cx family


def estimate_tcf_cx(req):
    """Estimate a TCF with the cornered-simplex family."""
    if req.method.family not in _CX_FAMILIES:
        raise ValueError(f"{req.method.family!r} is not a cx family")
    H, F, t_grid, (n0, m0, k0, l0) = _prepare(req)
    g = req.method.gamma
    norm_inv = 1.0 / (F * (F * g / (1.0 + F * g)) ** (F - 1))

    def sampler(rng, nb):
        Z = sample_sphere_batch(F, g, rng, nb)[:, None, :]
        W = F * _kernel_entry(Z, m0, n0, g)
        return Z, W

    def evaluate(Zt, W):
        e = 0.5 * np.abs(Zt[:, 0, k0]) ** 2
        return np.sum(W * (norm_inv * (e >= 1.0)))

    sums, sizes = _run_blocks(req, H, t_grid, sampler, evaluate, 1, np.complex128, np.ones(1))
    return _mean_result(req, t_grid, sums, sizes)


# ---------------------------------------------------------------------------
# xc families


def _triangle_population_sampler(rng, nb, F, focus):
    """Actions for the triangle density kernel focused on one state.

    The focus action has density proportional to (2 - e) on [1, 2], the
    spectators are uniform on [0, 2 - e_focus], angles are uniform.
    """
    u = rng.random(nb)
    e_focus = 2.0 - np.sqrt(1.0 - u)
    spect = rng.random((nb, F - 1)) * (2.0 - e_focus)[:, None]
    theta = rng.random((nb, F)) * (2.0 * np.pi)
    e = np.empty((nb, F))
    others = [i for i in range(F) if i != focus]
    e[:, focus] = e_focus
    e[:, others] = spect
    return np.sqrt(2.0 * e) * np.exp(1j * theta)


def _xc_plan(req, F, idx):
    """Sampler/observable pair for the noncovariant-covariant families."""
    n0, m0, k0, l0 = idx
    fam = req.method.family
    diagonal = n0 == m0

    if fam == "triangle_sqc":
        third = req.method.obs_gamma == "third"

        def sampler(rng, nb):
            if diagonal:
                z = _triangle_population_sampler(rng, nb, F, n0)
                W = np.ones(nb, dtype=np.complex128)
            else:
                pick = rng.random(nb) < 0.5
                u = rng.random(nb)
                e_focus = 2.0 - np.sqrt(1.0 - u)
                spect = rng.random((nb, F - 1)) * (2.0 - e_focus)[:, None]
                theta = rng.random((nb, F)) * (2.0 * np.pi)
                e = np.empty((nb, F))
                for focus, mask in ((n0, pick), (m0, ~pick)):
                    others = [i for i in range(F) if i != focus]
                    e[mask, focus] = e_focus[mask]
                    e[np.ix_(mask, others)] = spect[mask]
                z = np.sqrt(2.0 * e) * np.exp(1j * theta)
                W = 1.2 * z[:, m0] * np.conj(z[:, n0])
            Z = z[:, None, :]
            if third:
                gobs = np.full(nb, 1.0 / 3.0)
            else:
                gobs = (np.sum(0.5 * np.abs(z) ** 2, axis=1) - 1.0) / F
            return Z, (W, gobs)

        def evaluate(Zt, aux):
            W, gobs = aux
            val = 0.5 * Zt[:, 0, l0] * np.conj(Zt[:, 0, k0])
            if l0 == k0:
                val = val - gobs
            return np.sum(W * val)

        return sampler, evaluate, np.ones(1)

    if fam in ("ehrenfest", "lambda_point"):
        g = 0.0 if fam == "ehrenfest" else req.method.gamma

        def sampler(rng, nb):
            theta = rng.random((nb, F)) * (2.0 * np.pi)
            e = np.full((nb, F), g)
            if diagonal:
                e[:, n0] = 1.0 + g
                W = np.ones(nb, dtype=np.complex128)
                z = np.sqrt(2.0 * e) * np.exp(1j * theta)
            else:
                e[:, n0] = (1.0 + 2.0 * g) / 2.0
                e[:, m0] = (1.0 + 2.0 * g) / 2.0
                z = np.sqrt(2.0 * e) * np.exp(1j * theta)
                W = 2.0 * z[:, m0] * np.conj(z[:, n0]) / (1.0 + 2.0 * g) ** 2
            return z[:, None, :], W

        def evaluate(Zt, W):
            val = 0.5 * Zt[:, 0, l0] * np.conj(Zt[:, 0, k0])
            if l0 == k0:
                val = val - g
            return np.sum(W * val)

        return sampler, evaluate, np.ones(1)

    # dtwa / gdtwa
    sig = gdtwa_signature(F)
    signs = np.asarray(sig.signs, dtype=np.float64)
    set_n = gdtwa_points(F, n0 + 1)
    frames_n = set_n.frames
    if diagonal:

        def sampler(rng, nb):
            pts = rng.integers(frames_n.shape[0], size=nb)
            W = np.ones(nb, dtype=np.complex128)
            return frames_n[pts], W

    else:
        set_m = gdtwa_points(F, m0 + 1)
        frames_m = set_m.frames
        kv_n = np.array([K[m0, n0] for K in set_n.kernel_values])
        kv_m = np.array([K[m0, n0] for K in set_m.kernel_values])

        def sampler(rng, nb):
            pick = rng.random(nb) < 0.5
            pts = rng.integers(frames_n.shape[0], size=nb)
            Z = np.where(pick[:, None, None], frames_n[pts], frames_m[pts])
            W = 2.0 * np.where(pick, kv_n[pts], kv_m[pts])
            return Z, W

    def evaluate(Zt, W):
        val = np.einsum("r,nr,nr->n", 0.5 * signs, Zt[:, :, l0], np.conj(Zt[:, :, k0]))
        if l0 == k0:
            val = val - sig.gamma
        return np.sum(W * val)

    return sampler, evaluate, signs


def estimate_tcf_xc(req):
    """Estimate a TCF with the sampler-density, covariant-observable families."""
    if req.method.family not in _XC_FAMILIES:
        raise ValueError(f"{req.method.family!r} is not an xc family")
    H, F, t_grid, idx = _prepare(req)
    sampler, evaluate, signs = _xc_plan(req, F, idx)
    sums, sizes = _run_blocks(req, H, t_grid, sampler, evaluate, 1, np.complex128, signs)
    return _mean_result(req, t_grid, sums, sizes)


# ---------------------------------------------------------------------------
# ww families


def _ww_plan(req, F, n0):
    """Sampler and per-state window values for the ww families.

    The evaluator returns, per trajectory, the numerator contributions
    Qbar_{nn,mm} for every final state m; the caller accumulates state
    sums and forms the ratio to the summed denominator.
    """
    fam = req.method.family

    if fam == "triangle_ww":

        def sampler(rng, nb):
            z = _triangle_population_sampler(rng, nb, F, n0)
            return z[:, None, :], None

        def window_values(Zt, aux):
            e = _actions(Zt)
            n_above = np.sum(e > 1.0, axis=1)
            vals = (e >= 1.0) & ((n_above[:, None] - (e > 1.0)) == 0)
            return vals.astype(np.float64)

        return sampler, window_values, 1.0

    if fam == "triangle_f2_single":
        g = req.method.gamma
        cut = (1.0 + 2.0 * g) / 2.0

        def sampler(rng, nb):
            Z = sample_sphere_batch(F, g, rng, nb)[:, None, :]
            a0 = np.abs(Z[:, 0, n0]) ** 2
            return Z, a0

        def window_values(Zt, a0):
            at = np.abs(Zt[:, 0, :]) ** 2
            passing = (a0[:, None] >= 2.0 * cut) & (at >= 2.0 * cut)
            mn = np.minimum(a0[:, None], at)
            safe = np.where(passing, mn, 1.0)
            bracket = 2.0 - 2.0 * (2.0 * cut) ** 2 / safe**2
            return np.where(passing, bracket, 0.0)

        return sampler, window_values, float(F)

    # hill_ww
    g = req.method.gamma
    B = hill_exponent(F)

    def sampler(rng, nb):
        Z = sample_sphere_batch(F, g, rng, nb)[:, None, :]
        e0 = _actions(Z)
        rho_w = np.all(e0[:, n0, None] >= e0, axis=1).astype(np.float64)
        return Z, rho_w

    def window_values(Zt, rho_w):
        e = _actions(Zt)
        diffs = e[:, :, None] - e[:, None, :]
        clipped = np.where(diffs >= 0.0, diffs, 0.0)
        idx = np.arange(F)
        clipped[:, idx, idx] = 1.0
        vals = np.prod(clipped**B, axis=2)
        return rho_w[:, None] * vals

    return sampler, window_values, float(F)


def estimate_tcf_ww(req):
    """Estimate a population-population TCF with a window-window family."""
    if req.method.family not in _WW_FAMILIES:
        raise ValueError(f"{req.method.family!r} is not a ww family")
    H, F, t_grid, (n0, m0, k0, l0) = _prepare(req)
    sampler, window_values, meas = _ww_plan(req, F, n0)
    min_box = np.full(N_BLOCKS, np.inf)

    def evaluate_factory(block):
        def evaluate(Zt, aux):
            vals = window_values(Zt, aux)
            m = float(vals.min()) if vals.size else np.inf
            if m < min_box[block]:
                min_box[block] = m
            return np.sum(vals, axis=0)

        return evaluate

    sizes = _block_sizes(req.n_traj)
    prop = _propagators(H, t_grid) if req.backend == "exact" else None
    sums = np.zeros((N_BLOCKS, t_grid.size, F))

    def work(b):
        rng = _block_rng(req.seed, b)
        sums[b] = _block_series(
            rng,
            int(sizes[b]),
            sampler,
            evaluate_factory(b),
            F,
            np.float64,
            req,
            H,
            t_grid,
            np.ones(1),
            prop,
        )

    blocks = [b for b in range(N_BLOCKS) if sizes[b] > 0]
    if req.n_threads > 1:
        with ThreadPoolExecutor(max_workers=req.n_threads) as pool:
            list(pool.map(work, blocks))
    else:
        for b in blocks:
            work(b)

    num_total = np.sum(sums, axis=0)
    den_total = np.sum(num_total, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        estimates = (num_total[:, k0] / den_total).astype(np.complex128)
    den_blocks = np.sum(sums, axis=2)
    se = _jackknife_ratio(sums[:, :, k0], den_blocks, num_total[:, k0], den_total, sizes)
    normalization = meas * den_total / req.n_traj
    min_num = float(np.min(min_box))
    return TCFResult(t_grid, estimates, normalization, se, req.n_traj, min_num)


def estimate_tcf(req):
    """Dispatch a TCF request to its family's estimator."""
    fam = req.method.family
    if fam in _CC_FAMILIES:
        return estimate_tcf_cc(req)
    if fam in _CX_FAMILIES:
        return estimate_tcf_cx(req)
    if fam in _XC_FAMILIES:
        return estimate_tcf_xc(req)
    if fam in _WW_FAMILIES:
        return estimate_tcf_ww(req)
    raise ValueError(f"unknown method family {fam!r}")


# ---------------------------------------------------------------------------
# single-point window evaluation


def eval_window(kind, point, n):
    """Evaluate one window function at an r=1 point for state n (1-based).

    kinds: triangle (the density-side triangle window), hill_obs and
    hill_rho (the hill pair), cornered (the normalized cornered-simplex
    window, using the point's sphere parameter).
    """
    if point.r != 1:
        raise ValueError("windows are defined on single-frame points")
    F = point.F
    if not 1 <= n <= F:
        raise ValueError(f"state index {n} outside 1..{F}")
    e = point.actions()[0]
    n0 = n - 1
    others = [i for i in range(F) if i != n0]
    if kind == "triangle":
        val = float(e[n0] >= 1.0)
        for i in others:
            val *= float(2.0 - e[n0] - e[i] >= 0.0)
        return val
    if kind == "hill_obs":
        B = hill_exponent(F)
        val = 1.0
        for i in others:
            d = e[n0] - e[i]
            val *= d**B if d >= 0.0 else 0.0
        return val
    if kind == "hill_rho":
        return float(all(e[n0] >= e[i] for i in others))
    if kind == "cornered":
        g = point.signature.gamma
        if g <= 0:
            raise ValueError("cornered window needs a gamma > 0 sphere")
        norm = F * (F * g / (1.0 + F * g)) ** (F - 1)
        return float(e[n0] >= 1.0) / norm
    raise ValueError(f"unknown window kind {kind!r}")


# ---------------------------------------------------------------------------
# intra-electron correlation check


@dataclass
class IntraElectronReport:
    """Exact versus Monte Carlo sides of the intra-electron identity."""

    lhs: float
    rhs: float
    rhs_se: float
    n_traj: int
    cubic_moment: float
    cubic_target: float
    cubic_satisfied: bool


def intra_electron_check(weight, H, rho, A, n_traj, seed):
    """Compare (1/2)Tr[rho {A, H}] with its self-dual phase space average.

    The right side is the Monte Carlo integral of
    Tr[rho K] Tr[A K] Tr[H K] over the weighted spheres; the identity
    requires the weight to satisfy both the exact-mapping condition and
    the cubic moment condition int w (1+F gamma)^3 = (1+F)(2+F)/2.
    """
    H = require_hermitian(H)
    F = H.shape[0]
    rho = np.asarray(rho, dtype=np.complex128)
    A = np.asarray(A, dtype=np.complex128)
    lhs = float(np.real(0.5 * np.trace(rho @ (A @ H + H @ A))))
    tot = weight.abs_total()
    rng = _block_rng(seed, 0)
    gam, sgn = weight.sample_batch(rng, n_traj)
    w = rng.standard_normal((n_traj, F)) + 1j * rng.standard_normal((n_traj, F))
    norms = np.linalg.norm(w, axis=1)
    norms[norms == 0.0] = 1.0
    Z = w * (np.sqrt(2.0 * (1.0 + F * gam)) / norms)[:, None]

    def trace_against(M):
        quad = 0.5 * np.einsum("na,ab,nb->n", np.conj(Z), M, Z)
        return quad - gam * np.trace(M)

    vals = np.real(
        (F * tot * sgn) * trace_against(rho) * trace_against(A) * trace_against(H)
    )
    rhs = float(np.mean(vals))
    rhs_se = float(np.std(vals, ddof=1) / math.sqrt(n_traj)) if n_traj > 1 else math.nan
    cubic = weight.moment(lambda g: (1.0 + F * g) ** 3)
    target = 0.5 * (1.0 + F) * (2.0 + F)
    return IntraElectronReport(
        lhs, rhs, rhs_se, n_traj, float(cubic), float(target), abs(cubic - target) <= 1e-6
    )
