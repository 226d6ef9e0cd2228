import numpy as np
import pytest

from polrte import brackets as br
from polrte.coherence import CoherenceField, stokes_to_matrix, trace_product
from polrte.grid import GridError
from polrte.scattering import RotationSpec, apply_scattering, build_kernel

from conftest import make_grid, smooth_stokes


def matrix_bracket_reference(grid, a, b):
    """Independent complex-matrix evaluation of the bracket."""
    am, bm = stokes_to_matrix(a), stokes_to_matrix(b)

    def dmat(m, ax):
        out = np.empty_like(m)
        for i in range(2):
            for j in range(2):
                re = grid.ddx(np.ascontiguousarray(m[..., i, j].real), ax)
                im = grid.ddx(np.ascontiguousarray(m[..., i, j].imag), ax)
                out[..., i, j] = re + 1j * im
        return out

    ref = np.zeros_like(am)
    for ax_x, ax_k in (("x1", "k1"), ("x2", "k2")):
        ax_a, ak_a = dmat(am, ax_x), dmat(am, ax_k)
        ax_b, ak_b = dmat(bm, ax_x), dmat(bm, ax_k)
        ref += 0.5 * (ax_a @ ak_b + ak_b @ ax_a - ak_a @ ax_b - ax_b @ ak_a)
    return ref


class TestCanonicalBracket:
    def test_canonical_pair_interior(self):
        # [x1, k1] = 1; the theta part of the k1 chain rule carries the
        # O(dtheta^2) truncation of centered differences, so the value
        # is 1 + O(h^2), converging at second order (interior points:
        # the x1 coordinate is discontinuous across the periodic seam)
        errs = []
        for n in (32, 64, 128):
            g = make_grid(n, shells=tuple(np.linspace(0.5, 1.5, 9)), angles=n)
            x1, _x2, r, th = g.meshgrid()
            f = np.broadcast_to(x1, g.shape).copy()
            h = np.broadcast_to(r * np.cos(th), g.shape).copy()
            bracket = br.canonical_bracket(g, f, h)
            errs.append(np.max(np.abs(bracket[2:-2] - 1.0)))
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        assert errs[-1] < 5e-4
        assert np.all(orders > 1.8) and np.all(orders < 2.2)

    def test_self_bracket_vanishes(self, rng):
        g = make_grid(8, shells=(0.7, 1.0, 1.3), angles=8)
        f = rng.normal(size=g.shape)
        assert np.max(np.abs(br.canonical_bracket(g, f, f))) == 0.0

    def test_quadratic_pair(self):
        # [x1^2, k1^2] = 4 x1 k1, checked on interior points
        errs = []
        for n in (32, 64):
            g = make_grid(n, shells=tuple(np.linspace(0.5, 1.5, n // 2)), angles=n)
            x1, _x2, r, th = g.meshgrid()
            f = np.broadcast_to(x1 ** 2, g.shape).copy()
            h = np.broadcast_to((r * np.cos(th)) ** 2, g.shape).copy()
            bracket = br.canonical_bracket(g, f, h)
            exact = 4.0 * x1 * r * np.cos(th)
            errs.append(np.max(np.abs((bracket - exact)[2:-2])))
        assert errs[0] / errs[1] > 3.0

    def test_grid_mismatch(self, rng):
        g = make_grid(8)
        with pytest.raises(GridError):
            br.canonical_bracket(g, np.zeros(g.shape), np.zeros((2, 2)))


class TestMatrixBracket:
    def test_constant_fields_vanish(self):
        g = make_grid(8, angles=8)
        a = np.tile([1.0, 0.3, -0.2, 0.5], g.shape + (1,))
        assert np.max(np.abs(br.matrix_bracket(g, a, a * 2.0))) == 0.0

    def test_antisymmetry_exact(self, rng):
        g = make_grid(8, shells=(0.8, 1.0, 1.2), angles=8)
        u = rng.normal(size=g.shape + (4,))
        assert np.max(np.abs(br.matrix_bracket(g, u, u))) == 0.0
        v = rng.normal(size=g.shape + (4,))
        uv = br.matrix_bracket(g, u, v)
        vu = br.matrix_bracket(g, v, u)
        assert np.max(np.abs(uv + vu)) == 0.0

    def test_scalar_omega_gives_transport_form(self, rng):
        # [omega*I, W]_M = grad_x omega . grad_k W - grad_k omega . grad_x W
        g = make_grid(12, shells=tuple(np.linspace(0.6, 1.4, 6)), angles=12)
        x1, _x2, r, _th = g.meshgrid()
        omega = np.broadcast_to(np.sin(x1) * r, g.shape).copy()
        w = rng.normal(size=g.shape + (4,))
        lhs = br.matrix_bracket(g, br.omega_stokes(omega), w)
        rhs = np.zeros_like(w)
        for ax_x, ax_k in (("x1", "k1"), ("x2", "k2")):
            rhs += g.ddx(omega, ax_x)[..., None] * g.ddx(w, ax_k)
            rhs -= g.ddx(omega, ax_k)[..., None] * g.ddx(w, ax_x)
        assert np.max(np.abs(lhs - rhs)) < 1e-13

    def test_matches_complex_matrix_reference(self, rng):
        g = make_grid(8, shells=(0.7, 1.0, 1.3), angles=10)
        u = rng.normal(size=g.shape + (4,))
        v = rng.normal(size=g.shape + (4,))
        got = stokes_to_matrix(br.matrix_bracket(g, u, v))
        ref = matrix_bracket_reference(g, u, v)
        assert np.max(np.abs(got - ref)) < 1e-12 * max(1.0, np.max(np.abs(ref)))


class TestFunctionals:
    def test_entropy_of_half_identity(self):
        g = make_grid(8, shells=(1.0,), angles=8)
        w = CoherenceField.unpolarized(g, 1.0)  # W = identity / 2
        s = br.Entropy().value(w)
        assert s == pytest.approx(g.total_volume() / 4.0, rel=1e-13)

    def test_hamiltonian_unpolarized(self, rng):
        g = make_grid(8, shells=(0.5, 1.0, 2.0), angles=8)
        intensity = 1.0 + rng.random(g.shape)
        w = CoherenceField.unpolarized(g, intensity)
        omega = np.broadcast_to(g.radii[None, None, :, None], g.shape).copy()
        got = br.Hamiltonian(omega).value(w)
        ref = float(g.integrate(omega * intensity))
        assert got == pytest.approx(ref, rel=1e-14)

    def test_linear_test_of_w_doubles_entropy(self, rng):
        g = make_grid(8, angles=8)
        w = CoherenceField(g, rng.normal(size=g.shape + (4,)))
        f_w = br.LinearTest(w.data).value(w)
        assert f_w == pytest.approx(2.0 * br.Entropy().value(w), rel=1e-14)

    def test_derivative_fields(self, rng):
        g = make_grid(8, angles=8)
        w = CoherenceField(g, rng.normal(size=g.shape + (4,)))
        omega = np.broadcast_to(g.radii[None, None, :, None], g.shape).copy()
        assert br.Entropy().gradient(w) is w.data
        ham = br.Hamiltonian(omega).gradient(w)
        assert np.all(ham[..., 0] == 2.0 * omega)
        assert np.all(ham[..., 1:] == 0.0)
        free = br.FreeEnergy(omega).gradient(w)
        assert np.max(np.abs(free - ham - w.data)) < 1e-15

    @pytest.mark.parametrize("kind", ["linear", "hamiltonian", "entropy",
                                      "free_energy", "product"])
    def test_directional_derivative_oracle(self, rng, kind):
        # centered difference (F(W+eps V) - F(W-eps V)) / 2 eps against
        # <dF/dW, V> in the weighted inner product
        g = make_grid(8, shells=(0.8, 1.2), angles=8)
        w = CoherenceField(g, rng.normal(size=g.shape + (4,)))
        v = rng.normal(size=g.shape + (4,))
        omega = np.broadcast_to(g.radii[None, None, :, None], g.shape).copy()
        handles = {
            "linear": br.LinearTest(rng.normal(size=g.shape + (4,))),
            "hamiltonian": br.Hamiltonian(omega),
            "entropy": br.Entropy(),
            "free_energy": br.FreeEnergy(omega),
            "product": br.Product(br.Entropy(), br.Hamiltonian(omega)),
        }
        h = handles[kind]
        eps = 1e-5
        wp = CoherenceField(g, w.data + eps * v)
        wm = CoherenceField(g, w.data - eps * v)
        fd = (br.eval_functional(h, wp) - br.eval_functional(h, wm)) / (2 * eps)
        pairing = br.inner(g, br.functional_derivative(h, w), v)
        assert fd == pytest.approx(pairing, rel=1e-6)


class TestPoissonBracket:
    def test_self_bracket_zero(self, rng):
        g = make_grid(8, angles=8)
        w = CoherenceField(g, rng.normal(size=g.shape + (4,)))
        a = br.LinearTest(rng.normal(size=g.shape + (4,)))
        assert br.poisson_bracket(a, a, w) == 0.0

    def test_antisymmetry(self, rng):
        g = make_grid(8, shells=(0.9, 1.1), angles=8)
        w = CoherenceField(g, rng.normal(size=g.shape + (4,)))
        a = br.LinearTest(rng.normal(size=g.shape + (4,)))
        b = br.LinearTest(rng.normal(size=g.shape + (4,)))
        ab = br.poisson_bracket(a, b, w)
        assert br.poisson_bracket(b, a, w) == -ab

    def test_linear_vs_hamiltonian_reevaluation(self, rng):
        # {F_U, H} against an independent complex-matrix evaluation of
        # <W, [U, Omega]_M>
        g = make_grid(10, shells=tuple(np.linspace(0.7, 1.3, 5)), angles=10)
        w = CoherenceField(g, smooth_stokes(g, rng))
        u = smooth_stokes(g, rng)
        x1 = g.meshgrid()[0]
        omega = np.broadcast_to(
            (1.0 + 0.2 * np.cos(x1)) * g.radii[None, None, :, None], g.shape).copy()
        got = br.poisson_bracket(br.LinearTest(u), br.Hamiltonian(omega), w)
        ref_mat = matrix_bracket_reference(g, u, br.omega_stokes(omega))
        wm = stokes_to_matrix(w.data)
        integrand = np.real(np.einsum("...ij,...ji->...", wm, ref_mat))
        ref = float(g.integrate(integrand))
        assert got == pytest.approx(ref, abs=1e-12 * max(1.0, abs(ref)))

    def test_leibniz_rule_exact(self, rng):
        g = make_grid(8, angles=8)
        w = CoherenceField(g, rng.normal(size=g.shape + (4,)))
        a = br.LinearTest(rng.normal(size=g.shape + (4,)))
        b = br.LinearTest(rng.normal(size=g.shape + (4,)))
        c = br.LinearTest(rng.normal(size=g.shape + (4,)))
        lhs = br.poisson_bracket(br.Product(a, b), c, w)
        rhs = (a.value(w) * br.poisson_bracket(b, c, w)
               + b.value(w) * br.poisson_bracket(a, c, w))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_entropy_casimir_second_order(self, rng):
        # {S, F_U} -> 0 under refinement for smooth fields vanishing at
        # the radial annulus edges
        residuals = []
        for n in (16, 32, 64):
            g = make_grid(n, shells=tuple(np.linspace(0.7, 1.3, n)), angles=n)
            w = CoherenceField(g, smooth_stokes(
                g, np.random.default_rng(5), edge_vanishing=True))
            u = smooth_stokes(g, np.random.default_rng(6), edge_vanishing=True)
            residuals.append(abs(br.poisson_bracket(br.Entropy(),
                                                    br.LinearTest(u), w)))
        orders = np.log2(np.array(residuals[:-1]) / residuals[1:])
        assert np.all(orders > 1.7) and np.all(orders < 2.3)


class TestMetricBracket:
    def make_setup(self, rng, sigma0=0.6, beta=1.1):
        g = make_grid(6, shells=(1.0,), angles=12)
        kernel = build_kernel(RotationSpec(sigma0, beta=beta), g)
        w = CoherenceField(g, rng.normal(size=g.shape + (4,)))
        return g, kernel, w

    def test_negative_semidefinite(self, rng):
        g, kernel, w = self.make_setup(rng)
        for _ in range(50):
            a = br.LinearTest(rng.normal(size=g.shape + (4,)))
            val = br.metric_bracket(a, a, w, kernel)
            assert val <= 1e-12 * abs(val) + 1e-300

    def test_symmetry(self, rng):
        g, kernel, w = self.make_setup(rng)
        a = br.LinearTest(rng.normal(size=g.shape + (4,)))
        b = br.LinearTest(rng.normal(size=g.shape + (4,)))
        ab = br.metric_bracket(a, b, w, kernel)
        ba = br.metric_bracket(b, a, w, kernel)
        assert abs(ab - ba) <= 1e-12 * abs(ab)

    def test_bilinearity(self, rng):
        g, kernel, w = self.make_setup(rng)
        a = br.LinearTest(rng.normal(size=g.shape + (4,)))
        b = br.LinearTest(rng.normal(size=g.shape + (4,)))
        c = br.LinearTest(rng.normal(size=g.shape + (4,)))
        comb = br.LinearTest(0.3 * a.coeff - 1.7 * b.coeff)
        lhs = br.metric_bracket(comb, c, w, kernel)
        rhs = (0.3 * br.metric_bracket(a, c, w, kernel)
               - 1.7 * br.metric_bracket(b, c, w, kernel))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_hamiltonian_is_casimir(self, rng):
        # delta H / delta W is constant on each shell, so the pair
        # difference T A' - A T vanishes identically
        g, kernel, w = self.make_setup(rng)
        omega = np.broadcast_to(g.radii[None, None, :, None], g.shape).copy()
        ham = br.Hamiltonian(omega)
        for _ in range(10):
            b = br.LinearTest(rng.normal(size=g.shape + (4,)))
            assert br.metric_bracket(ham, b, w, kernel) == 0.0

    def test_entropy_production_identity(self, rng):
        # <W, S(W) - Sigma W> equals the metric bracket (S, S)(W)
        g, kernel, w = self.make_setup(rng)
        gain = apply_scattering(kernel, w)
        loss = kernel.sigma_field()[..., None] * w.data
        ds = float(g.integrate(trace_product(w.data, gain - loss)))
        ss = br.metric_bracket(br.Entropy(), br.Entropy(), w, kernel)
        assert ds == pytest.approx(ss, rel=1e-12)
