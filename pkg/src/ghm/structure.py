"""Structural constructions and verifications: inverses, degree-k tensor
building and reduction, omega ^ dC decompositions, level-set restriction,
constant-rank tests, and flat-decomposition verification.

Inverse checks apply the recorded ``inverse_law_sign`` from
:mod:`ghm.exterior`; tensor coefficients never absorb that sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as ex
from .errors import ChartError, DimensionError, DualityError
from .expr import Expr, ScalarField
from .exterior import (
    FormField,
    FormValue,
    MultiVectorField,
    PointMap,
    VectorField,
    grad_field,
    interior_by_form,
    interior_form_field,
    interior_vector,
    interior_vector_field,
    inverse_law_sign,
    pullback_with_jacobian,
    wedge_fields,
)
from .hdw import RCOND

DUALITY_TOL = 1e-9


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Distribution:
    """A smooth distribution, spanned explicitly or as the joint kernel of
    exact 1-forms dC^1..dC^m."""

    n: int
    fields: tuple[VectorField, ...] = ()
    constraints: tuple[ScalarField, ...] = ()

    @classmethod
    def spanned_by(cls, fields: Sequence[VectorField]) -> "Distribution":
        return cls(fields[0].n, tuple(fields), ())

    @classmethod
    def annihilating(cls, constraints: Sequence[ScalarField]) -> "Distribution":
        return cls(constraints[0].n, (), tuple(constraints))

    @classmethod
    def full(cls, n: int) -> "Distribution":
        basis = tuple(
            VectorField(n, tuple(ex.ONE if i == j else ex.ZERO for i in range(1, n + 1)))
            for j in range(1, n + 1)
        )
        return cls(n, basis, ())

    def spanning_at(self, point: Sequence[float]) -> list[np.ndarray]:
        if self.fields:
            return [f.at(point) for f in self.fields]
        G = np.array([c.gradient(point) for c in self.constraints])
        _, sv, vh = np.linalg.svd(G)
        cutoff = sv[0] * RCOND if sv.size and sv[0] > 0 else 0.0
        rank = int(np.sum(sv > cutoff))
        return [vh[i, :].copy() for i in range(rank, self.n)]


# ---------------------------------------------------------------------------
# Inverse laws
# ---------------------------------------------------------------------------

def _inverse_defect(w: FormField, J: MultiVectorField, Y: np.ndarray,
                    point: Sequence[float], sign: int) -> float:
    contracted = interior_vector(Y, w.at(point))
    recovered = interior_by_form(contracted, J.at(point))
    vec = np.array([recovered.component((i,)) for i in range(1, w.n + 1)])
    return float(np.linalg.norm(sign * vec - Y))


def strong_inverse_residual(w: FormField, J: MultiVectorField,
                            points: Sequence[Sequence[float]]) -> float:
    """Max defect of inverse_law_sign(k) * iota_{iota_X w} J = X over basis
    vectors X = d_j (sufficient by linearity) and sample points."""
    if w.n != J.n or w.k != J.k:
        raise DimensionError("inverse check needs equal n and k")
    sign = inverse_law_sign(w.k)
    worst = 0.0
    for p in points:
        for j in range(w.n):
            Y = np.zeros(w.n)
            Y[j] = 1.0
            worst = max(worst, _inverse_defect(w, J, Y, p, sign))
    return worst


def delta_inverse_residual(w: FormField, J: MultiVectorField, delta: Distribution,
                           points: Sequence[Sequence[float]]) -> float:
    """Same defect restricted to spanning sections of the distribution."""
    if w.n != J.n or w.k != J.k:
        raise DimensionError("inverse check needs equal n and k")
    sign = inverse_law_sign(w.k)
    worst = 0.0
    for p in points:
        for Y in delta.spanning_at(p):
            worst = max(worst, _inverse_defect(w, J, Y, p, sign))
    return worst


# ---------------------------------------------------------------------------
# Degree-k tensor construction / reduction
# ---------------------------------------------------------------------------

def _check_duality(ns: Sequence[VectorField], Cs: Sequence[ScalarField],
                   points: Sequence[Sequence[float]]) -> None:
    for p in points:
        for i, ni in enumerate(ns):
            Yi = ni.at(p)
            for j, Cj in enumerate(Cs):
                got = float(np.dot(Yi, Cj.gradient(p)))
                want = 1.0 if i == j else 0.0
                if abs(got - want) > DUALITY_TOL:
                    raise DualityError(
                        f"iota_n{i + 1} dC{j + 1} = {got:g} != {want:g} at {tuple(p)}")


def build_poisson_k(J2: MultiVectorField, Cs: Sequence[ScalarField],
                    ns: Sequence[VectorField],
                    points: Sequence[Sequence[float]] = ()) -> MultiVectorField:
    """N ^ J2 with N = n_{k-2} ^ ... ^ n_1; the iterated contraction by
    dC^1..dC^{k-2} then returns J2 exactly.

    Requires iota_{n_i} dC^j = delta_i^j and dC^i in ker(J2) at the sample
    points (checked when points are supplied).
    """
    if len(Cs) != len(ns):
        raise DualityError("need one frame field per constraint")
    if points:
        _check_duality(ns, Cs, points)
        for j, Cj in enumerate(Cs):
            kerfield = interior_form_field(grad_field(Cj), J2)
            for p in points:
                V = kerfield.at(p)
                if V.max_abs() > DUALITY_TOL:
                    raise DualityError(
                        f"dC{j + 1} is not in ker(J2): residual {V.max_abs():g} at {tuple(p)}")
    N = ns[-1].as_multivector()
    for ni in reversed(ns[:-1]):
        N = wedge_fields(N, ni.as_multivector())
    return wedge_fields(N, J2)


def reduce_k_to_2(J: MultiVectorField, Cs: Sequence[ScalarField]) -> MultiVectorField:
    """iota_{dC^1} ... iota_{dC^{k-2}} J (rightmost contraction first)."""
    if len(Cs) != J.k - 2:
        raise DimensionError(f"need k-2={J.k - 2} constraints, got {len(Cs)}")
    out = J
    for C in reversed(Cs):
        out = interior_form_field(grad_field(C), out)
    return out


def build_w_from_omega(omega: FormField, Cs: Sequence[ScalarField]) -> FormField:
    """omega ^ dC^1 ^ ... ^ dC^{k-2} with exact symbolic differentials."""
    out = omega
    for C in Cs:
        out = wedge_fields(out, grad_field(C))
    return out


def extract_omega(w: FormField, ns: Sequence[VectorField],
                  Cs: Sequence[ScalarField] = (),
                  points: Sequence[Sequence[float]] = ()) -> FormField:
    """iota_N w with N = n_1 ^ ... ^ n_{k-2}, contracting n_1 first.

    When the decomposition hypotheses hold, (extract ^ dC) reproduces w at the
    sample points.  Duality against the constraints is validated when given.
    """
    if Cs and points:
        _check_duality(ns, Cs, points)
    out = w
    for ni in ns:
        out = interior_vector_field(ni, out)
    return out


# ---------------------------------------------------------------------------
# Level sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelSetChart:
    """Local parameterization of the joint level set of constraint functions.

    The complementary axes parameterize the level set; the remaining
    (dependent) axes are solved from C(x) = c.  Axes default to a greedy
    largest-pivot choice on the constraint Jacobian at the base point.
    """

    constraints: tuple[ScalarField, ...]
    values: tuple[float, ...]
    base_point: tuple[float, ...]
    complementary_axes: tuple[int, ...] = ()

    def __post_init__(self):
        n = self.constraints[0].n
        m = len(self.constraints)
        if len(self.values) != m:
            raise ChartError("one level value per constraint required")
        if not self.complementary_axes:
            object.__setattr__(self, "complementary_axes", self._pick_axes())
        if len(self.complementary_axes) != n - m:
            raise ChartError(f"need {n - m} complementary axes")
        G = np.array([c.gradient(self.base_point) for c in self.constraints])
        if np.linalg.matrix_rank(G) < m:
            raise ChartError("constraint differentials are dependent at the base point")
        B = G[:, [a - 1 for a in self.dependent_axes]]
        if abs(np.linalg.det(B)) < 1e-12:
            raise ChartError("dependent-axes Jacobian block is singular at the base point")

    def _pick_axes(self) -> tuple[int, ...]:
        n = self.constraints[0].n
        G = np.array([c.gradient(self.base_point) for c in self.constraints])
        dependent: list[int] = []
        for row in G:
            order = np.argsort(-np.abs(row))
            axis = next(int(a) + 1 for a in order if int(a) + 1 not in dependent)
            dependent.append(axis)
        return tuple(a for a in range(1, n + 1) if a not in dependent)

    @property
    def n(self) -> int:
        return self.constraints[0].n

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def dependent_axes(self) -> tuple[int, ...]:
        return tuple(a for a in range(1, self.n + 1) if a not in self.complementary_axes)

    def is_coordinate_chart(self) -> bool:
        """True when every constraint is a bare coordinate function."""
        return all(isinstance(c.expression, ex.Coord) for c in self.constraints)

    def embed(self, u: Sequence[float]) -> np.ndarray:
        """Map reduced coordinates to the ambient point on the level set
        (damped Newton on the dependent axes, tolerance 1e-12, 50 iterations)."""
        x = np.array(self.base_point, dtype=float)
        for a, ua in zip(self.complementary_axes, u):
            x[a - 1] = ua
        dep = [a - 1 for a in self.dependent_axes]
        target = np.asarray(self.values, dtype=float)

        def residual(xx):
            return np.array([c(xx) for c in self.constraints]) - target

        r = residual(x)
        for _ in range(50):
            if float(np.linalg.norm(r)) <= 1e-12:
                return x
            G = np.array([c.gradient(x) for c in self.constraints])[:, dep]
            step = np.linalg.solve(G, r)
            t = 1.0
            while t >= 1e-6:
                trial = x.copy()
                trial[dep] -= t * step
                r_trial = residual(trial)
                if np.linalg.norm(r_trial) < np.linalg.norm(r) or np.linalg.norm(r) <= 1e-12:
                    x, r = trial, r_trial
                    break
                t *= 0.5
            else:
                raise ChartError("Newton damping underflow in level-set solve")
        if float(np.linalg.norm(r)) <= 1e-12:
            return x
        raise ChartError("Newton did not converge in 50 iterations")

    def embedding_jacobian(self, u: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """(ambient point, d(ambient)/d(reduced)) via the implicit function rule."""
        x = self.embed(u)
        n, m = self.n, self.m
        comp = [a - 1 for a in self.complementary_axes]
        dep = [a - 1 for a in self.dependent_axes]
        G = np.array([c.gradient(x) for c in self.constraints])
        dv = -np.linalg.solve(G[:, dep], G[:, comp])  # shape (m, n-m)
        J = np.zeros((n, n - m))
        for col, a in enumerate(comp):
            J[a, col] = 1.0
        for row, a in enumerate(dep):
            J[a, :] = dv[row, :]
        return x, J

    def pull_scalar(self, f: ScalarField, u: Sequence[float]) -> float:
        return f(self.embed(u))

    def pull_scalar_gradient(self, f: ScalarField, u: Sequence[float]) -> np.ndarray:
        x, J = self.embedding_jacobian(u)
        return np.asarray(f.gradient(x)) @ J

    def pull_form(self, w: FormField, u: Sequence[float]) -> FormValue:
        """i_c^* w at reduced coordinates; axes relabeled 1..n-m in
        complementary-axis order."""
        x, J = self.embedding_jacobian(u)
        return pullback_with_jacobian(J, w.at(x))

    def restrict_field(self, f: ScalarField | FormField):
        """Exact symbolic restriction; only for coordinate constraints, where
        restriction is substitution plus coordinate deletion."""
        if not self.is_coordinate_chart():
            raise ChartError("exact restriction requires coordinate constraint functions")
        sub = {c.expression.axis: ex.const(v)
               for c, v in zip(self.constraints, self.values)}
        relabel = {a: ex.Coord(i + 1) for i, a in enumerate(self.complementary_axes)}
        nr = self.n - self.m

        def convert(e: Expr) -> Expr:
            return ex.substitute(ex.substitute(e, sub), relabel)

        if isinstance(f, ScalarField):
            return ScalarField(nr, convert(f.expression), f.name)
        out: dict[tuple, Expr] = {}
        axis_map = {a: i + 1 for i, a in enumerate(self.complementary_axes)}
        for key, e in f.coeffs.items():
            if any(a not in axis_map for a in key):
                continue
            out[tuple(axis_map[a] for a in key)] = convert(e)
        return FormField(nr, f.k, out)


def restrict_to_level_set(chart: LevelSetChart, f: ScalarField | FormField):
    """Exact restriction to the level set for coordinate constraints; see
    :meth:`LevelSetChart.pull_form` / :meth:`pull_scalar` for the general,
    pointwise route."""
    return chart.restrict_field(f)


# ---------------------------------------------------------------------------
# Constant rank with respect to constraints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankReport:
    rank: int
    corank: int
    constant_over_samples: bool
    ranks: tuple[int, ...]
    points: tuple[tuple[float, ...], ...]

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "corank": self.corank,
            "constant_over_samples": self.constant_over_samples,
            "ranks": list(self.ranks),
            "points": [list(p) for p in self.points],
        }


def rank_wrt(omega: FormField, Cs: Sequence[ScalarField],
             points: Sequence[Sequence[float]]) -> RankReport:
    """Rank of the restriction of a 2-form to the level set through each
    sample point (even by antisymmetry; counted singular values are rounded
    down to even)."""
    if omega.k != 2:
        raise DimensionError("rank_wrt applies to 2-forms")
    n, m = omega.n, len(Cs)
    ranks = []
    for p in points:
        G = np.array([c.gradient(p) for c in Cs])
        _, svg, vh = np.linalg.svd(G)
        cutg = svg[0] * RCOND if svg.size and svg[0] > 0 else 0.0
        basis = vh[int(np.sum(svg > cutg)):, :]  # rows span ker dC
        W = np.zeros((n, n))
        V = omega.at(p)
        for (i, j), c in V.coeffs.items():
            W[i - 1, j - 1] = c
            W[j - 1, i - 1] = -c
        M = basis @ W @ basis.T
        sv = np.linalg.svd(M, compute_uv=False)
        cutoff = sv[0] * RCOND if sv.size and sv[0] > 0 else 0.0
        r = int(np.sum(sv > cutoff))
        ranks.append(r - (r % 2))
    rank0 = ranks[0] if ranks else 0
    return RankReport(
        rank=rank0,
        corank=(n - m) - rank0,
        constant_over_samples=all(r == rank0 for r in ranks),
        ranks=tuple(ranks),
        points=tuple(tuple(float(v) for v in p) for p in points),
    )


# ---------------------------------------------------------------------------
# Dual frames and flat-decomposition verification
# ---------------------------------------------------------------------------

def propose_dual_frame(Cs: Sequence[ScalarField],
                       points: Sequence[Sequence[float]]) -> tuple[VectorField, ...]:
    """Coordinate-axis frame n_i = (1/d_{a_i} C^i) d_{a_i} when each C^i has a
    private axis of strict monotonicity; validated against all constraints."""
    n = Cs[0].n
    base = points[0]
    G = np.array([c.gradient(base) for c in Cs])
    chosen: list[int] = []
    for row in G:
        order = np.argsort(-np.abs(row))
        axis = next(int(a) + 1 for a in order if int(a) + 1 not in chosen)
        if abs(row[axis - 1]) < 1e-12:
            raise DualityError("no usable monotone axis for a constraint")
        chosen.append(axis)
    frame = []
    for Ci, axis in zip(Cs, chosen):
        comps = [ex.ZERO] * n
        comps[axis - 1] = ex.div(ex.ONE, Ci.partial(axis))
        frame.append(VectorField(n, tuple(comps)))
    _check_duality(frame, Cs, points)
    return tuple(frame)


def verify_flat_decomposition(w: FormField, chart_map: PointMap, ell: int,
                              casimir_axes: Sequence[int],
                              points: Sequence[Sequence[float]]) -> float:
    """Check that the pullback of w under the candidate coordinate map equals
    sum_{i<=ell} dx^{2i-1} ^ dx^{2i} wedged with the Casimir-axis differentials.
    Verification only; no coordinates are constructed here."""
    n = w.n
    flat = FormField.constant(n, 2, {(2 * i - 1, 2 * i): 1.0 for i in range(1, ell + 1)})
    target = flat
    for a in casimir_axes:
        target = wedge_fields(target, FormField.constant(n, 1, {(a,): 1.0}))
    if target.k != w.k:
        raise DimensionError("rank/casimir split does not match the form degree")
    worst = 0.0
    for u in points:
        x = chart_map.at(u)
        pulled = pullback_with_jacobian(chart_map.jacobian(u), w.at(x))
        diff = pulled - target.at(u)
        worst = max(worst, diff.max_abs())
    return worst


def divergence_in_chart(X: VectorField, chart_map: PointMap, u: Sequence[float],
                        step: float = 1e-5) -> float:
    """Divergence of the coordinate-transformed field at reduced point u,
    by central differences of J^(-1) X(phi(u))."""
    n = X.n

    def field_in_chart(uu: np.ndarray) -> np.ndarray:
        J = chart_map.jacobian(uu)
        return np.linalg.solve(J, X.at(chart_map.at(uu)))

    total = 0.0
    u = np.asarray(u, dtype=float)
    for i in range(n):
        up, um = u.copy(), u.copy()
        up[i] += step
        um[i] -= step
        total += (field_in_chart(up)[i] - field_in_chart(um)[i]) / (2 * step)
    return float(total)
