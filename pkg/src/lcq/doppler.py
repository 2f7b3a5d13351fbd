"""Maxwell-velocity averaging of the microscopic response into macroscopic
propagation coefficients, plus an independent Voigt-profile oracle.

The macroscopic absorption/dispersion and cross-coupling coefficients are
weighted integrals of the per-velocity-class responses over the Maxwell
distribution W(v) = exp(-v^2/u^2)/(u sqrt(pi)).  A single real scale factor,
fixed by requiring alpha4 = 1 at zero drives and zero probe detuning, maps
the microscopic responses to coefficients in alpha40 units.

The integrands contain resonances that are far narrower than the thermal
width (homogeneous widths are a percent of the Doppler width), so the
default quadrature is a velocity grid with a finely sampled core and coarser
wings; uniform trapezoid and Gauss-Hermite rules are available for
cross-checks.  For resolved features the trapezoid weights converge
exponentially, which the convergence gate verifies by node doubling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.integrate import quad as _adaptive_quad

from . import liouville
from .scheme import FieldConfig, LevelScheme, MediumParams, RelaxationSet

QUAD_RULES = ("core-refined", "trapezoid", "gauss-hermite")

# Velocity chunk for streaming grid evaluations (bounds peak memory).
_VCHUNK = 48


@dataclass(frozen=True)
class QuadratureSpec:
    """Velocity quadrature: rule, node counts and thermal speed.

    ``u`` is the most probable speed sqrt(2 kB T / M) in m/s.  ``u = 0``
    collapses the average to the single v = 0 class.  For the core-refined
    rule, ``n`` nodes cover the central +-core*u where all drive, probe and
    two-photon resonances of the supported scans live, and ``wing_n`` nodes
    per side cover the smooth Maxwell wings out to +-span*u.
    """

    u: float
    rule: str = "core-refined"
    n: int = 1311
    span: float = 4.5
    core: float = 1.6
    wing_n: int = 100

    def __post_init__(self) -> None:
        if self.rule not in QUAD_RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.u < 0:
            raise ValueError("thermal speed must be >= 0")
        if self.u > 0 and self.n < 8:
            raise ValueError("need at least 8 quadrature nodes")
        if self.rule == "core-refined" and not (0 < self.core < self.span):
            raise ValueError("core half-width must lie inside the span")

    @classmethod
    def for_medium(cls, scheme: LevelScheme, medium: MediumParams, **kwargs) -> "QuadratureSpec":
        return cls(u=medium.thermal_speed(scheme), **kwargs)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Velocity nodes (m/s) and Maxwell-weighted quadrature weights."""
        if self.u == 0.0:
            return np.array([0.0]), np.array([1.0])
        if self.rule == "gauss-hermite":
            x, w = hermgauss(self.n)
            return x * self.u, w / math.sqrt(math.pi)
        if self.rule == "trapezoid":
            v = np.linspace(-self.span * self.u, self.span * self.u, self.n)
            return v, self._trapezoid_weights(v)
        vc = np.linspace(-self.core * self.u, self.core * self.u, self.n)
        vl = np.linspace(-self.span * self.u, -self.core * self.u, self.wing_n + 1)
        vr = np.linspace(self.core * self.u, self.span * self.u, self.wing_n + 1)
        v = np.concatenate([vl[:-1], vc, vr[1:]])
        w = np.zeros_like(v)
        nl = self.wing_n
        for seg in (slice(0, nl + 1), slice(nl, nl + self.n), slice(nl + self.n - 1, None)):
            w[seg] += self._trapezoid_weights(v[seg])
        return v, w

    def _trapezoid_weights(self, v: np.ndarray) -> np.ndarray:
        h = np.diff(v)
        w = np.zeros_like(v)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w * np.exp(-((v / self.u) ** 2)) / (self.u * math.sqrt(math.pi))

    def refined(self) -> "QuadratureSpec":
        """Nested refinement: roughly double the node density everywhere."""
        if self.rule == "gauss-hermite":
            return replace(self, n=2 * self.n)
        return replace(self, n=2 * self.n - 1, wing_n=2 * self.wing_n)


def kahan_sum(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Compensated weighted sum over the leading axis, in fixed index order."""
    shape = values.shape[1:]
    total = np.zeros(shape, dtype=values.dtype)
    comp = np.zeros(shape, dtype=values.dtype)
    for i in range(values.shape[0]):
        y = weights[i] * values[i] - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


class _KahanAccumulator:
    """Streaming fixed-order compensated accumulator for chunked averages."""

    def __init__(self, shape, dtype=complex):
        self.total = np.zeros(shape, dtype=dtype)
        self.comp = np.zeros(shape, dtype=dtype)

    def add(self, values: np.ndarray, weights: np.ndarray) -> None:
        for i in range(values.shape[0]):
            y = weights[i] * values[i] - self.comp
            t = self.total + y
            self.comp = (t - self.total) - y
            self.total = t


@dataclass(frozen=True)
class MacroscopicCoefficients:
    """Velocity-averaged propagation coefficients in alpha40 units.

    sigma_j = deltak_j + i alpha_j / 2 multiplies the wave's own amplitude;
    gamma4/gamma2 are the cross-coupling coefficients of the probe pair and
    already include the drive product (amplitudes and phases), so they vanish
    whenever either drive is off.
    """

    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    deltak1: float
    deltak2: float
    deltak3: float
    deltak4: float
    gamma4: complex
    gamma2: complex

    def sigma(self, j: int) -> complex:
        alpha = (self.alpha1, self.alpha2, self.alpha3, self.alpha4)[j - 1]
        deltak = (self.deltak1, self.deltak2, self.deltak3, self.deltak4)[j - 1]
        return deltak + 0.5j * alpha


class AveragingError(RuntimeError):
    """A per-velocity solve failed during averaging; names the failing node."""


def _locate_failing_node(relax, medium, om1p, om3p, G1, G3):
    """First velocity index whose steady-state solve is singular, if any."""
    for i in range(np.size(om1p)):
        try:
            liouville.drive_steady_state_batch(
                relax, medium.p_n, om1p[i], om3p[i], G1, G3)
        except liouville.SingularSystemError:
            return i
    return None


def _shifts(scheme: LevelScheme, v: np.ndarray) -> list[np.ndarray]:
    """Doppler shifts v/lambda_j in MHz for each wave."""
    return [v / w * 1e-6 for w in scheme.wavelengths]


def _drive_ratios(
    rho0: np.ndarray,
    om1p, om3p,
    G1, G3,
    relax: RelaxationSet,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-velocity drive coherences per unit Rabi amplitude.

    At zero amplitude the ratio continues smoothly into the linear-response
    Lorentzian around the state driven by the other field, which keeps the
    effective drive susceptibility continuous down to G = 0.
    """
    from .scheme import RAD_PER_MHZ

    G1b = np.broadcast_to(np.asarray(G1, dtype=complex), rho0.shape[:-2])
    G3b = np.broadcast_to(np.asarray(G3, dtype=complex), rho0.shape[:-2])
    d1pop = rho0[..., 0, 0] - rho0[..., 2, 2]
    d3pop = rho0[..., 1, 1] - rho0[..., 3, 3]
    lin1 = 1j * RAD_PER_MHZ * d1pop / (relax.coh_gl - 1j * RAD_PER_MHZ * np.asarray(om1p))
    lin3 = 1j * RAD_PER_MHZ * d3pop / (relax.coh_mn - 1j * RAD_PER_MHZ * np.asarray(om3p))
    with np.errstate(invalid="ignore", divide="ignore"):
        r1 = np.where(G1b != 0, rho0[..., 2, 0] / np.where(G1b != 0, G1b, 1.0), lin1)
        r3 = np.where(G3b != 0, rho0[..., 3, 1] / np.where(G3b != 0, G3b, 1.0), lin3)
    return r1, r3


@lru_cache(maxsize=64)
def _norm_constant(
    scheme: LevelScheme,
    relax: RelaxationSet,
    medium: MediumParams,
    quad: QuadratureSpec,
) -> float:
    """Scale factor mapping microscopic responses to alpha40 units.

    Defined so that the averaged weak-field absorption of wave 4 at zero
    detuning is exactly alpha40, using the same solver and quadrature code
    path as production averages.
    """
    v, w = quad.nodes()
    sh = _shifts(scheme, v)
    rho0 = liouville.drive_steady_state_batch(relax, medium.p_n, -sh[0], -sh[2], 0.0, 0.0)
    a4, _, _, _ = liouville.probe_response_batch(
        rho0, -sh[0], -sh[1], -sh[3], 0.0, 0.0, relax
    )
    mean_a4 = kahan_sum(a4, w)
    k4 = 1.0  # relative wavenumber of wave 4
    d4 = scheme.dipoles[3]
    raw_alpha4 = 2.0 * float(np.imag(k4 * d4 * d4 * mean_a4))
    if raw_alpha4 <= 0:
        raise AveragingError("weak-field resonant absorption is not positive")
    return medium.alpha40 / raw_alpha4


def average_coefficients(
    scheme: LevelScheme,
    relax: RelaxationSet,
    medium: MediumParams,
    fields: FieldConfig,
    G1: complex,
    G3: complex,
    quad: QuadratureSpec,
) -> MacroscopicCoefficients:
    """Doppler-average all propagation coefficients at given drive amplitudes.

    Every velocity class sees the same drive Rabi amplitudes (plane waves);
    only the detunings are shifted.  The drive self-coefficients sigma_1/3
    are effective (intensity-dependent) values defined through the exact
    drive coherences; the probe coefficients come from the first-order
    response.
    """
    G1 = complex(G1)
    G3 = complex(G3)
    v, w = quad.nodes()
    sh = _shifts(scheme, v)
    om1p = fields.omega1 - sh[0]
    om2p = fields.omega2 - sh[1]
    om3p = fields.omega3 - sh[2]
    om4p = fields.omega4 - sh[3]
    try:
        rho0 = liouville.drive_steady_state_batch(relax, medium.p_n, om1p, om3p, G1, G3)
        a4, b4, a2, b2 = liouville.probe_response_batch(
            rho0, om1p, om2p, om4p, G1, G3, relax
        )
    except liouville.SingularSystemError as exc:
        node = _locate_failing_node(relax, medium, om1p, om3p, G1, G3)
        where = f"velocity node {node} (v = {v[node]:.3f} m/s)" if node is not None else "batch"
        raise AveragingError(f"velocity averaging failed at {where}: {exc}") from exc
    r1, r3 = _drive_ratios(rho0, om1p, om3p, G1, G3, relax)
    mean = {
        "a4": kahan_sum(a4, w),
        "b4": kahan_sum(b4, w),
        "a2": kahan_sum(a2, w),
        "b2": kahan_sum(b2, w),
        "gl_ratio": kahan_sum(r1, w),
        "mn_ratio": kahan_sum(r3, w),
    }
    return _assemble(scheme, relax, medium, quad, mean)


def _assemble(
    scheme: LevelScheme,
    relax: RelaxationSet,
    medium: MediumParams,
    quad: QuadratureSpec,
    mean: dict,
) -> MacroscopicCoefficients:
    scale = _norm_constant(scheme, relax, medium, quad)
    l1, l2, l3, l4 = scheme.wavelengths
    k1, k2, k3 = l4 / l1, l4 / l2, l4 / l3  # relative wavenumbers, k4 = 1
    d1, d2, d3, d4 = scheme.dipoles

    sigma4 = scale * 1.0 * d4 * d4 * mean["a4"]
    sigma2 = scale * k2 * d2 * d2 * mean["a2"]
    gamma4 = scale * 1.0 * d4 * d2 * mean["b4"]
    gamma2 = scale * k2 * d2 * d4 * mean["b2"]
    sigma1 = scale * k1 * d1 * d1 * mean["gl_ratio"]
    sigma3 = scale * k3 * d3 * d3 * mean["mn_ratio"]

    return MacroscopicCoefficients(
        alpha1=2.0 * float(np.imag(sigma1)),
        alpha2=2.0 * float(np.imag(sigma2)),
        alpha3=2.0 * float(np.imag(sigma3)),
        alpha4=2.0 * float(np.imag(sigma4)),
        deltak1=float(np.real(sigma1)),
        deltak2=float(np.real(sigma2)),
        deltak3=float(np.real(sigma3)),
        deltak4=float(np.real(sigma4)),
        gamma4=complex(gamma4),
        gamma2=complex(gamma2),
    )


def quadrature_gate(
    scheme: LevelScheme,
    relax: RelaxationSet,
    medium: MediumParams,
    fields: FieldConfig,
    G1: complex,
    G3: complex,
    quad: QuadratureSpec,
    rtol: float = 1e-6,
) -> tuple[bool, float]:
    """Convergence gate: relative change of alpha4 under node doubling."""
    coarse = average_coefficients(scheme, relax, medium, fields, G1, G3, quad)
    fine = average_coefficients(scheme, relax, medium, fields, G1, G3, quad.refined())
    rel = abs(coarse.alpha4 - fine.alpha4) / max(abs(fine.alpha4), 1e-300)
    return rel < rtol, rel


def refine_until_converged(
    scheme: LevelScheme,
    relax: RelaxationSet,
    medium: MediumParams,
    fields: FieldConfig,
    G1: complex,
    G3: complex,
    quad: QuadratureSpec,
    rtol: float = 1e-6,
    max_doublings: int = 3,
) -> QuadratureSpec:
    """Double quadrature density until the gate passes (bounded)."""
    current = quad
    for _ in range(max_doublings):
        ok, _ = quadrature_gate(scheme, relax, medium, fields, G1, G3, current, rtol)
        if ok:
            return current
        current = current.refined()
    return current


# ---------------------------------------------------------------------------
# Grid evaluation used by the propagation coefficient cache.  The zeroth-order
# sources over a (|G1|, |G3|) grid are independent of the probe detuning and
# can be shared by many probe-frequency columns.
# ---------------------------------------------------------------------------

class DriveGrid:
    """Zeroth-order solution tabulated over velocity and a real drive grid.

    Holds the probe source elements for all (v, |G1|, |G3|) combinations and
    the velocity-averaged drive coherences.  Intended to be built once and
    reused by every probe-detuning column of a scan.
    """

    def __init__(
        self,
        scheme: LevelScheme,
        relax: RelaxationSet,
        medium: MediumParams,
        fields: FieldConfig,
        g1_grid: np.ndarray,
        g3_grid: np.ndarray,
        quad: QuadratureSpec,
    ):
        self.scheme = scheme
        self.relax = relax
        self.medium = medium
        self.fields = fields
        self.g1_grid = np.asarray(g1_grid, dtype=float)
        self.g3_grid = np.asarray(g3_grid, dtype=float)
        self.quad = quad
        self.v, self.w = quad.nodes()
        sh = _shifts(scheme, self.v)
        self.om1p = fields.omega1 - sh[0]
        self.om3p = fields.omega3 - sh[2]
        self.shift2 = sh[1]
        self.shift4 = sh[3]

        nv = self.v.size
        ng1 = self.g1_grid.size
        ng3 = self.g3_grid.size
        self.src = np.empty((nv, ng1, ng3, 6), dtype=complex)
        gl_acc = _KahanAccumulator((ng1, ng3))
        mn_acc = _KahanAccumulator((ng1, ng3))
        g1b = self.g1_grid[None, :, None]
        g3b = self.g3_grid[None, None, :]
        for start in range(0, nv, _VCHUNK):
            stop = min(start + _VCHUNK, nv)
            rho0 = liouville.drive_steady_state_batch(
                relax, medium.p_n,
                self.om1p[start:stop, None, None], self.om3p[start:stop, None, None],
                g1b, g3b,
            )
            self.src[start:stop] = np.stack(liouville.compact_sources(rho0), axis=-1)
            r1, r3 = _drive_ratios(
                rho0,
                self.om1p[start:stop, None, None], self.om3p[start:stop, None, None],
                g1b, g3b, relax,
            )
            gl_acc.add(r1, self.w[start:stop])
            mn_acc.add(r3, self.w[start:stop])
        self.mean_gl_ratio = gl_acc.total
        self.mean_mn_ratio = mn_acc.total

    def coefficients_for(self, fields: FieldConfig) -> list[list[MacroscopicCoefficients]]:
        """Macroscopic coefficients on the drive grid for one probe detuning.

        ``fields`` must share the drive detunings of the grid; only the probe
        detuning omega4 (and the slaved omega2) may differ.
        """
        if (fields.omega1, fields.omega3) != (self.fields.omega1, self.fields.omega3):
            raise ValueError("drive detunings differ from the tabulated grid")
        om2p = fields.omega2 - self.shift2
        om4p = fields.omega4 - self.shift4
        nv = self.v.size
        ng1 = self.g1_grid.size
        ng3 = self.g3_grid.size
        acc = {key: _KahanAccumulator((ng1, ng3)) for key in ("a4", "b4", "a2", "b2")}
        g1b = self.g1_grid[None, :, None]
        g3b = self.g3_grid[None, None, :]
        for start in range(0, nv, _VCHUNK):
            stop = min(start + _VCHUNK, nv)
            chunk = self.src[start:stop]
            a4, b4, a2, b2 = liouville.probe_response_compact(
                tuple(chunk[..., i] for i in range(6)),
                self.om1p[start:stop, None, None],
                om2p[start:stop, None, None],
                om4p[start:stop, None, None],
                g1b, g3b, self.relax,
            )
            ws = self.w[start:stop]
            acc["a4"].add(a4, ws)
            acc["b4"].add(b4, ws)
            acc["a2"].add(a2, ws)
            acc["b2"].add(b2, ws)
        out = []
        for i in range(ng1):
            row = []
            for j in range(ng3):
                mean = {
                    "a4": acc["a4"].total[i, j],
                    "b4": acc["b4"].total[i, j],
                    "a2": acc["a2"].total[i, j],
                    "b2": acc["b2"].total[i, j],
                    "gl_ratio": self.mean_gl_ratio[i, j],
                    "mn_ratio": self.mean_mn_ratio[i, j],
                }
                row.append(
                    _assemble(self.scheme, self.relax, self.medium, self.quad, mean)
                )
            out.append(row)
        return out


# ---------------------------------------------------------------------------
# Independent Voigt oracle (direct adaptive quadrature; does not reuse the
# velocity-grid machinery above).
# ---------------------------------------------------------------------------

def voigt_reference(omega: float, gamma_coh: float, doppler_width: float) -> complex:
    """Complex Voigt profile by adaptive convolution quadrature.

    Returns the Gaussian-weighted average of the complex Lorentzian
    gamma/(gamma - i(omega - x)) with Gaussian 1/e half-width
    ``doppler_width``; the real part is the absorption profile.  Arguments
    share any common frequency unit.
    """
    if gamma_coh <= 0:
        raise ValueError("Lorentzian width must be positive")
    if doppler_width < 0:
        raise ValueError("Doppler width must be >= 0")
    if doppler_width == 0.0:
        return gamma_coh / (gamma_coh - 1j * omega)

    d = doppler_width
    span = 8.0 * d

    def weight(x):
        return math.exp(-((x / d) ** 2)) / (d * math.sqrt(math.pi))

    def integrand_re(x):
        delta = omega - x
        return weight(x) * gamma_coh * gamma_coh / (gamma_coh**2 + delta**2)

    def integrand_im(x):
        delta = omega - x
        return weight(x) * gamma_coh * delta / (gamma_coh**2 + delta**2)

    points = [p for p in (0.0, omega) if -span < p < span]
    re, re_err = _adaptive_quad(
        integrand_re, -span, span, points=points, limit=400, epsabs=1e-13, epsrel=1e-11
    )
    im, im_err = _adaptive_quad(
        integrand_im, -span, span, points=points, limit=400, epsabs=1e-13, epsrel=1e-11
    )
    if re_err > 1e-8 * max(abs(re), 1e-3) or im_err > 1e-8 * max(abs(im), abs(re), 1e-3):
        raise RuntimeError("adaptive Voigt quadrature did not converge")
    return complex(re, im)
