"""Machine-precision bracket certification and grid convergence studies.

The continuum identities (Jacobi for the matrix bracket, the entropy
Casimir) involve exact first and second derivatives of smooth test
fields. Those are supplied by :class:`Jet`, a truncated second-order
Taylor value (value, gradient, Hessian) propagated through arithmetic
exactly, so nested brackets can be evaluated to rounding without any
symbolic algebra. On the grid, the same identities hold only at second
order in the spacing; the suite certifies the convergence order instead
of an absolute tolerance there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .brackets import (
    Entropy,
    FunctionalHandle,
    Hamiltonian,
    LinearTest,
    Product,
    inner,
    matrix_bracket,
    metric_bracket,
    poisson_bracket,
    poisson_bracket_handle,
)
from .coherence import CoherenceField
from .grid import GridConfig, PhaseSpaceGrid, build_grid
from .scattering import RotationSpec, build_kernel

# ---------------------------------------------------------------------------
# second-order jets
# ---------------------------------------------------------------------------


class Jet:
    """Taylor data (value, gradient, Hessian) over D coordinates.

    Values are numpy arrays over sample points; complex entries are
    allowed. ``hess`` may be None for first-order-only jets (bracket
    outputs), in which case only value/gradient operations are valid.
    """

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess=None):
        self.val = np.asarray(val)
        self.grad = np.asarray(grad)
        self.hess = None if hess is None else np.asarray(hess)

    @staticmethod
    def seed(points: np.ndarray) -> list["Jet"]:
        """One jet per coordinate of the (P, D) sample array."""
        p, d = points.shape
        jets = []
        for i in range(d):
            grad = np.zeros((p, d))
            grad[:, i] = 1.0
            jets.append(Jet(points[:, i].copy(), grad, np.zeros((p, d, d))))
        return jets

    @staticmethod
    def const(value, like: "Jet") -> "Jet":
        p, d = like.grad.shape
        return Jet(np.full(p, value), np.zeros((p, d)),
                   None if like.hess is None else np.zeros((p, d, d)))

    def __add__(self, other):
        if isinstance(other, Jet):
            h = None
            if self.hess is not None and other.hess is not None:
                h = self.hess + other.hess
            return Jet(self.val + other.val, self.grad + other.grad, h)
        return Jet(self.val + other, self.grad.copy(),
                   None if self.hess is None else self.hess.copy())

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad,
                   None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            val = self.val * other.val
            grad = (self.val[..., None] * other.grad
                    + other.val[..., None] * self.grad)
            h = None
            if self.hess is not None and other.hess is not None:
                outer = (self.grad[..., :, None] * other.grad[..., None, :])
                h = (self.val[..., None, None] * other.hess
                     + other.val[..., None, None] * self.hess
                     + outer + np.swapaxes(outer, -1, -2))
            return Jet(val, grad, h)
        return Jet(self.val * other, self.grad * other,
                   None if self.hess is None else self.hess * other)

    __rmul__ = __mul__

    def _chain(self, u, du, ddu):
        grad = du[..., None] * self.grad
        h = None
        if self.hess is not None:
            outer = self.grad[..., :, None] * self.grad[..., None, :]
            h = du[..., None, None] * self.hess + ddu[..., None, None] * outer
        return Jet(u, grad, h)


def jet_sin(f: Jet) -> Jet:
    return f._chain(np.sin(f.val), np.cos(f.val), -np.sin(f.val))


def jet_cos(f: Jet) -> Jet:
    return f._chain(np.cos(f.val), -np.sin(f.val), -np.cos(f.val))


def jet_exp(f: Jet) -> Jet:
    e = np.exp(f.val)
    return f._chain(e, e, e)


def canonical_bracket_jet(f: Jet, g: Jet, n_pairs: int) -> Jet:
    """[f, g] as a first-order jet (consumes the input Hessians)."""
    fx, fk = f.grad[..., :n_pairs], f.grad[..., n_pairs:2 * n_pairs]
    gx, gk = g.grad[..., :n_pairs], g.grad[..., n_pairs:2 * n_pairs]
    val = np.sum(fx * gk - fk * gx, axis=-1)
    if f.hess is None or g.hess is None:
        return Jet(val, np.zeros_like(f.grad) * np.nan)
    hx_f = f.hess[..., :n_pairs, :]
    hk_f = f.hess[..., n_pairs:2 * n_pairs, :]
    hx_g = g.hess[..., :n_pairs, :]
    hk_g = g.hess[..., n_pairs:2 * n_pairs, :]
    grad = (np.einsum("...ma,...m->...a", hx_f, gk)
            + np.einsum("...m,...ma->...a", fx, hk_g)
            - np.einsum("...ma,...m->...a", hk_f, gx)
            - np.einsum("...m,...ma->...a", fk, hx_g))
    return Jet(val, grad)


def canonical_bracket_value(f: Jet, g: Jet, n_pairs: int) -> np.ndarray:
    fx, fk = f.grad[..., :n_pairs], f.grad[..., n_pairs:2 * n_pairs]
    gx, gk = g.grad[..., :n_pairs], g.grad[..., n_pairs:2 * n_pairs]
    return np.sum(fx * gk - fk * gx, axis=-1)


def matrix_bracket_jet(u, v, n_pairs: int):
    """[U, V]_M on 2x2 jet matrices; entries become first-order jets."""
    out = [[None, None], [None, None]]
    for i in range(2):
        for j in range(2):
            acc = None
            for k in range(2):
                term = (canonical_bracket_jet(u[i][k], v[k][j], n_pairs)
                        + canonical_bracket_jet(u[k][j], v[i][k], n_pairs))
                acc = term if acc is None else acc + term
            out[i][j] = acc * 0.5
    return out


def matrix_bracket_value(u, v, n_pairs: int) -> np.ndarray:
    vals = np.empty(u[0][0].val.shape + (2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            acc = 0.0
            for k in range(2):
                acc = acc + (canonical_bracket_value(u[i][k], v[k][j], n_pairs)
                             + canonical_bracket_value(u[k][j], v[i][k], n_pairs))
            vals[..., i, j] = 0.5 * acc
    return vals


@dataclass
class AnalyticMatrixFn:
    """Closure producing a 2x2 jet matrix from seeded coordinates."""

    fn: object
    description: str = ""

    def __call__(self, coords):
        return self.fn(coords)


def _random_trig_scalar(rng: np.random.Generator, n_pairs: int, n_modes: int = 3):
    d = 2 * n_pairs
    waves = rng.integers(-2, 3, size=(n_modes, d)).astype(float)
    phases = rng.uniform(0, 2 * np.pi, size=n_modes)
    amps = rng.normal(scale=1.0 / n_modes, size=n_modes)

    def build(coords):
        acc = None
        for w, ph, a in zip(waves, phases, amps):
            arg = Jet.const(ph, coords[0])
            for c, wc in zip(coords, w):
                if wc != 0.0:
                    arg = arg + c * wc
            term = jet_cos(arg) * a
            acc = term if acc is None else acc + term
        return acc

    return build


def random_hermitian_fn(rng: np.random.Generator, n_pairs: int,
                        n_modes: int = 3) -> AnalyticMatrixFn:
    comps = [_random_trig_scalar(rng, n_pairs, n_modes) for _ in range(4)]

    def fn(coords):
        si, sq, su, sv = (c(coords) for c in comps)
        w00 = (si + sq) * 0.5
        w11 = (si - sq) * 0.5
        w01 = su * 0.5 + sv * 0.5j
        w10 = su * 0.5 + sv * (-0.5j)
        return [[w00, w01], [w10, w11]]

    return AnalyticMatrixFn(fn, "random trig-polynomial Hermitian matrix")


def jacobi_residual_matrix(u_fn, v_fn, w_fn, points: np.ndarray,
                           n_pairs: int) -> float:
    """Relative sup-norm of the cyclic Jacobi sum of the matrix bracket."""
    coords = Jet.seed(points)
    u, v, w = u_fn(coords), v_fn(coords), w_fn(coords)
    uv = matrix_bracket_jet(u, v, n_pairs)
    vw = matrix_bracket_jet(v, w, n_pairs)
    wu = matrix_bracket_jet(w, u, n_pairs)
    t1 = matrix_bracket_value(uv, w, n_pairs)
    t2 = matrix_bracket_value(vw, u, n_pairs)
    t3 = matrix_bracket_value(wu, v, n_pairs)

    def fro(m):
        return np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1)))

    scale = np.maximum(np.maximum(fro(t1), fro(t2)), fro(t3))
    return float(np.max(fro(t1 + t2 + t3) / (scale + 1e-300)))


def antisymmetry_residual_matrix(u_fn, v_fn, points: np.ndarray,
                                 n_pairs: int) -> float:
    coords = Jet.seed(points)
    u, v = u_fn(coords), v_fn(coords)
    uv = matrix_bracket_value(u, v, n_pairs)
    vu = matrix_bracket_value(v, u, n_pairs)
    scale = np.max(np.abs(uv)) + 1e-300
    return float(np.max(np.abs(uv + vu)) / scale)


# ---------------------------------------------------------------------------
# grid-level studies
# ---------------------------------------------------------------------------


def _stokes_function(rng: np.random.Generator, n_terms: int = 3):
    """Random smooth Stokes field as a closure over the grid coordinates.

    Sum of trig-polynomial terms in the periodic directions (including
    zero modes, so bracket integrands do not vanish by orthogonality)
    times radial polynomials that vanish at the annulus edges: the
    integration-by-parts identities behind the Casimir statements pick
    up radial boundary flux otherwise, since the annulus is not the
    full k-plane. The same function can be sampled on every refinement
    level.
    """
    mx = rng.integers(0, 3, size=(4, n_terms))
    mt = rng.integers(0, 3, size=(4, n_terms))
    ph1 = rng.uniform(0, 2 * np.pi, size=(4, n_terms))
    ph2 = rng.uniform(0, 2 * np.pi, size=(4, n_terms))
    amp = rng.normal(scale=0.7 / n_terms, size=(4, n_terms))
    rad = rng.normal(scale=0.6, size=(4, n_terms, 2))

    def sample(grid: PhaseSpaceGrid) -> np.ndarray:
        x1, _x2, r, th = grid.meshgrid()
        kx = 2.0 * np.pi / grid.x_extent[0]
        out = np.zeros(grid.shape + (4,))
        lo, hi = grid.radii[0], grid.radii[-1]
        rbar = r - 0.5 * (lo + hi)
        if grid.n_shells > 1:
            edge = (r - lo) * (hi - r) / (0.5 * (hi - lo)) ** 2
        else:
            edge = np.ones_like(r)
        for c in range(4):
            for t in range(n_terms):
                radial = edge * (rad[c, t, 0] + rad[c, t, 1] * rbar)
                out[..., c] += (amp[c, t] * np.cos(mx[c, t] * kx * x1 + ph1[c, t])
                                * np.cos(mt[c, t] * th + ph2[c, t]) * radial)
        return out

    return sample


@dataclass
class CheckResult:
    name: str
    residual: float
    threshold: float
    passed: bool
    detail: str = ""

    def format(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        line = (f"{self.name:<44s} residual={self.residual:12.4e} "
                f"threshold={self.threshold:9.2e} {tag}")
        if self.detail:
            line += f"  [{self.detail}]"
        return line


@dataclass
class Report:
    kind: str
    checks: list[CheckResult] = field(default_factory=list)

    def add(self, name, residual, threshold, detail="", higher_is_better=False):
        ok = residual >= threshold if higher_is_better else residual <= threshold
        self.checks.append(CheckResult(name, float(residual), float(threshold),
                                       bool(ok), detail))

    def add_range(self, name, value, lo, hi, detail=""):
        ok = lo <= value <= hi
        self.checks.append(CheckResult(name, float(value), float(hi), bool(ok),
                                       detail or f"expected in [{lo}, {hi}]"))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def format_lines(self) -> list[str]:
        return [c.format() for c in self.checks]


def _refinement_grids(sizes=(16, 32, 64), shells=(0.7, 1.3)) -> list[PhaseSpaceGrid]:
    grids = []
    for n in sizes:
        cfg = GridConfig(
            x_extent=(2.0 * np.pi,), x_points=(n,),
            k_shells=tuple(np.linspace(shells[0], shells[1], n)),
            k_angles=n,
        )
        grids.append(build_grid(cfg))
    return grids


def fitted_order(residuals) -> float:
    r = np.maximum(np.asarray(residuals, dtype=float), 1e-300)
    ratios = np.log2(r[:-1] / r[1:])
    return float(np.mean(ratios))


def axiom_suite(bracket_kind: str, seed: int = 0, sizes=(16, 32, 64),
                n_draws: int = 200, n_triples: int = 20,
                n_points: int = 100, n_pairs: int = 3) -> Report:
    """Run the property battery for one bracket family.

    ``matrix`` uses the exact jet oracle; ``poisson_grid`` and
    ``metric_grid`` exercise the discrete brackets, with convergence
    fits where exactness is only asymptotic.
    """
    rng = np.random.default_rng(seed)
    report = Report(bracket_kind)

    if bracket_kind == "matrix":
        worst_anti, worst_jac = 0.0, 0.0
        for _ in range(n_triples):
            pts = rng.uniform(0, 2 * np.pi, size=(n_points, 2 * n_pairs))
            u = random_hermitian_fn(rng, n_pairs)
            v = random_hermitian_fn(rng, n_pairs)
            w = random_hermitian_fn(rng, n_pairs)
            worst_anti = max(worst_anti,
                             antisymmetry_residual_matrix(u, v, pts, n_pairs))
            worst_jac = max(worst_jac,
                            jacobi_residual_matrix(u, v, w, pts, n_pairs))
        report.add("matrix bracket antisymmetry", worst_anti, 1e-14)
        report.add("matrix bracket Jacobi (exact oracle)", worst_jac, 1e-10,
                   detail=f"{n_triples} triples x {n_points} points")
        return report

    if bracket_kind == "poisson_grid":
        grids = _refinement_grids(sizes)
        u_fn, v_fn, p_fn, w_fn = (_stokes_function(rng) for _ in range(4))

        g0 = grids[0]
        w0 = CoherenceField(g0, w_fn(g0))
        a = LinearTest(u_fn(g0))
        b = LinearTest(v_fn(g0))
        c = LinearTest(p_fn(g0))
        ab = poisson_bracket(a, b, w0)
        ba = poisson_bracket(b, a, w0)
        report.add("poisson antisymmetry", abs(ab + ba) / (abs(ab) + 1e-300), 1e-12)

        lam, mu = 0.7, -1.3
        comb = LinearTest(lam * a.coeff + mu * b.coeff)
        lin = poisson_bracket(comb, c, w0)
        lin_ref = lam * poisson_bracket(a, c, w0) + mu * poisson_bracket(b, c, w0)
        report.add("poisson bilinearity",
                   abs(lin - lin_ref) / (abs(lin_ref) + 1e-300), 1e-12)

        prod = Product(a, b)
        lhs = poisson_bracket(prod, c, w0)
        rhs_val = (a.value(w0) * poisson_bracket(b, c, w0)
                   + b.value(w0) * poisson_bracket(a, c, w0))
        report.add("poisson Leibniz rule",
                   abs(lhs - rhs_val) / (abs(rhs_val) + 1e-300), 1e-12)

        jac, cas = [], []
        for g in grids:
            w = CoherenceField(g, w_fn(g))
            ag, bg, cg = (LinearTest(f(g)) for f in (u_fn, v_fn, p_fn))
            total = (poisson_bracket(poisson_bracket_handle(ag, bg, g), cg, w)
                     + poisson_bracket(poisson_bracket_handle(bg, cg, g), ag, w)
                     + poisson_bracket(poisson_bracket_handle(cg, ag, g), bg, w))
            jac.append(abs(total))
            cas.append(abs(poisson_bracket(Entropy(), ag, w)))
        report.add_range("poisson Jacobi convergence order",
                         fitted_order(jac), 1.8, 2.2,
                         detail="residuals " + ", ".join(f"{r:.3e}" for r in jac))
        report.add_range("entropy Casimir {S,F} convergence order",
                         fitted_order(cas), 1.8, 2.2,
                         detail="residuals " + ", ".join(f"{r:.3e}" for r in cas))
        return report

    if bracket_kind == "metric_grid":
        cfg = GridConfig(x_extent=(2.0 * np.pi,), x_points=(8,),
                         k_shells=(1.0,), k_angles=16)
        grid = build_grid(cfg)
        kernel = build_kernel(RotationSpec(sigma0=0.8, beta=1.3), grid)
        omega = np.broadcast_to(grid.radii[None, None, :, None], grid.shape).copy()
        ham = Hamiltonian(omega)

        worst_pos, worst_sym, worst_cas = 0.0, 0.0, 0.0
        for _ in range(n_draws):
            w = CoherenceField(grid, rng.normal(size=grid.shape + (4,)))
            a = LinearTest(rng.normal(size=grid.shape + (4,)))
            b = LinearTest(rng.normal(size=grid.shape + (4,)))
            aa = metric_bracket(a, a, w, kernel)
            bb = metric_bracket(b, b, w, kernel)
            worst_pos = max(worst_pos, max(aa, 0.0) / (abs(aa) + 1e-300))
            ab = metric_bracket(a, b, w, kernel)
            ba = metric_bracket(b, a, w, kernel)
            worst_sym = max(worst_sym, abs(ab - ba) / (abs(ab) + 1e-300))
            hb = metric_bracket(ham, b, w, kernel)
            worst_cas = max(worst_cas, abs(hb) / (abs(bb) + 1e-300))
        report.add("metric negative semidefiniteness", worst_pos, 1e-12,
                   detail=f"{n_draws} random draws")
        report.add("metric symmetry", worst_sym, 1e-12)
        report.add("energy Casimir (H, F) = 0", worst_cas, 1e-12)
        return report

    raise ValueError(f"unknown bracket kind {bracket_kind!r}")


# ---------------------------------------------------------------------------
# thermodynamic verdicts
# ---------------------------------------------------------------------------


@dataclass
class ThermoVerdict:
    entropy_ok: bool
    max_entropy_increment: float
    worst_entropy_step: int
    energy_ok: bool
    max_energy_drift: float
    worst_energy_step: int

    @property
    def passed(self) -> bool:
        return self.entropy_ok and self.energy_ok


def parse_diagnostics_csv(path) -> list[tuple]:
    """Read a diagnostics CSV; report malformed rows with line numbers."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        expected = "step,time,hamiltonian,entropy,free_energy,entropy_rate"
        if header != expected:
            raise ValueError(f"line 1: unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ValueError(f"line {lineno}: expected 6 fields, got {len(parts)}")
            try:
                rows.append((int(parts[0]),) + tuple(float(p) for p in parts[1:]))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
    return rows


def thermo_report(records, entropy_tol: float = 1e-12,
                  energy_band: float | None = None) -> ThermoVerdict:
    """Check the two thermodynamic laws on a sequence of diagnostics.

    ``records`` may be a CSV path or a list of objects/tuples carrying
    (step, time, hamiltonian, entropy, ...).
    """
    if isinstance(records, (str, bytes)) or hasattr(records, "read"):
        rows = parse_diagnostics_csv(records)
        steps = [r[0] for r in rows]
        hams = [r[2] for r in rows]
        ents = [r[3] for r in rows]
    else:
        steps = [r.step for r in records]
        hams = [r.hamiltonian for r in records]
        ents = [r.entropy for r in records]
    if len(steps) < 2:
        raise ValueError("need at least two records")

    incs = np.diff(ents)
    worst_s = int(np.argmax(incs))
    drift = np.abs(np.asarray(hams) - hams[0])
    worst_h = int(np.argmax(drift))
    band = energy_band if energy_band is not None else np.inf
    return ThermoVerdict(
        entropy_ok=bool(np.all(incs <= entropy_tol)),
        max_entropy_increment=float(np.max(incs)),
        worst_entropy_step=steps[worst_s + 1],
        energy_ok=bool(np.max(drift) <= band),
        max_energy_drift=float(np.max(drift)),
        worst_energy_step=steps[worst_h],
    )
