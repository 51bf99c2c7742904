"""
🧮 Topology Tables
Symbolic tables for fibers and level sets of quantum control landscapes

This module implements:
- Homotopy groups of endpoint fibers for SU(N), CP^{N-1} and flag manifolds
- Poincare series of loop spaces and of complex Grassmannians (exact integers)
- Critical-manifold inventories for gate and observable landscapes
- Betti numbers of dynamical critical sets through the collapsed Serre
  spectral sequence, H*(C) (x) H*(Omega SU(N))
- CSV / JSON emitters; every row carries an anchor string naming its claim
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd
import sympy as sp

from config.app_config import SCHEMA_VERSION
from control_engine.errors import MultiplicityError, TopologyError, UnsupportedSpaceError

logger = logging.getLogger(__name__)

SPACE_KINDS = ("su", "cp", "flag", "grassmannian", "grassmannian_product", "flag_product")

ANCHORS = {
    "su": "fiber pi_i = pi_{i+1}(SU(N)); Bott periodicity, Z in even degrees 2..2N-2",
    "cp": "fiber pi_i = pi_{i+1}(CP^{N-1}); S^1 -> S^{2N-1} -> CP^{N-1}, valid through 2N-2",
    "flag": "fiber pi_0 = 0, pi_1 = pi_2(flag) = Z^{kappa-1}; higher groups depend on multiplicities",
    "loop_su": "H*(Omega SU(N); Z) = Z[x_2, ..., x_{2N-2}], zero in odd degrees",
    "loop_cp": "H*(Omega CP^{N-1}; Z) = Lambda[x_1] (x) divided powers on y of degree 2N-2",
    "grassmannian": "P_t[Gr(nu, n)] = prod_{j<=n}(1-t^{2j}) / prod_{j<=nu}(1-t^{2j}) prod_{j<=n-nu}(1-t^{2j})",
    "gate_critical": "critical manifolds of |Tr(AA^dag W^dag U)|^2: products of Gr(nu_j, n_j), N phase copies each",
    "observable_critical": "critical manifolds of Tr(U rho U^dag O): products of flags F(k_i1, ...), sum_j k_ij = n_i",
    "dynamical_betti": "H*(e^{-1}(C); Z) = H*(C) (x) Z[x_2, ..., x_{2N-2}]; spectral sequence collapses at E2",
    "components": "dynamical level sets have as many components as kinematic ones when fibers are connected",
}


@dataclass(frozen=True)
class AbelianGroupExpr:
    """Finitely generated abelian group Z^rank + sum Z/q; ``unknown`` outside proven ranges."""

    rank: int = 0
    torsion: Tuple[int, ...] = ()
    unknown: bool = False

    def __post_init__(self):
        if self.rank < 0:
            raise TopologyError(f"free rank must be >= 0, got {self.rank}")
        if any(q < 2 for q in self.torsion):
            raise TopologyError(f"torsion orders must be >= 2, got {self.torsion}")
        object.__setattr__(self, "torsion", tuple(sorted(self.torsion)))

    @classmethod
    def zero(cls) -> "AbelianGroupExpr":
        return cls()

    @classmethod
    def free(cls, rank: int) -> "AbelianGroupExpr":
        return cls(rank=rank)

    @classmethod
    def unknown_group(cls) -> "AbelianGroupExpr":
        return cls(unknown=True)

    @property
    def is_trivial(self) -> bool:
        return not self.unknown and self.rank == 0 and not self.torsion

    def __str__(self) -> str:
        if self.unknown:
            return "unknown"
        parts = []
        if self.rank == 1:
            parts.append("Z")
        elif self.rank > 1:
            parts.append(f"Z^{self.rank}")
        parts.extend(f"Z/{q}Z" for q in self.torsion)
        return " + ".join(parts) if parts else "0"


Z = AbelianGroupExpr.free(1)
TRIVIAL = AbelianGroupExpr.zero()
UNKNOWN = AbelianGroupExpr.unknown_group()


@dataclass(frozen=True)
class SpaceSpec:
    """A state manifold M, or a critical manifold built from Grassmannian / flag factors."""

    kind: str
    params: Tuple[int, ...] = ()
    factors: Tuple["SpaceSpec", ...] = ()

    def __post_init__(self):
        if self.kind not in SPACE_KINDS:
            raise UnsupportedSpaceError(f"unsupported space kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(int(p) for p in self.params))
        if self.kind in ("su", "cp"):
            if len(self.params) != 1 or self.params[0] < 2:
                raise UnsupportedSpaceError(f"{self.kind} needs one parameter N >= 2")
        elif self.kind == "flag":
            if not self.params or any(n < 1 for n in self.params):
                raise MultiplicityError(f"flag multiplicities must be positive, got {self.params}")
        elif self.kind == "grassmannian":
            if len(self.params) != 2 or not (0 <= self.params[0] <= self.params[1]):
                raise MultiplicityError(f"Grassmannian needs 0 <= nu <= n, got {self.params}")
        elif not self.factors:
            raise UnsupportedSpaceError(f"{self.kind} needs at least one factor")

    @classmethod
    def su(cls, n: int) -> "SpaceSpec":
        return cls("su", (n,))

    @classmethod
    def cp(cls, n: int) -> "SpaceSpec":
        """CP^{n-1}, the pure states of an n-level system."""
        return cls("cp", (n,))

    @classmethod
    def flag(cls, *multiplicities: int) -> "SpaceSpec":
        return cls("flag", tuple(multiplicities))

    @classmethod
    def grassmannian(cls, nu: int, n: int) -> "SpaceSpec":
        return cls("grassmannian", (nu, n))

    @classmethod
    def grassmannian_product(cls, pairs: Iterable[Tuple[int, int]]) -> "SpaceSpec":
        return cls("grassmannian_product", factors=tuple(cls.grassmannian(nu, n) for nu, n in pairs))

    @classmethod
    def flag_product(cls, rows: Iterable[Sequence[int]]) -> "SpaceSpec":
        return cls("flag_product", factors=tuple(cls.flag(*row) for row in rows))

    @property
    def N(self) -> int:
        if self.kind in ("su", "cp"):
            return self.params[0]
        if self.kind == "flag":
            return sum(self.params)
        if self.kind == "grassmannian":
            return self.params[1]
        return sum(f.N for f in self.factors)

    def __str__(self) -> str:
        if self.kind == "su":
            return f"SU({self.params[0]})"
        if self.kind == "cp":
            return f"CP^{self.params[0] - 1}"
        if self.kind == "flag":
            return "F(" + ",".join(map(str, self.params)) + ")"
        if self.kind == "grassmannian":
            return f"Gr({self.params[0]},{self.params[1]})"
        return " x ".join(str(f) for f in self.factors)


@dataclass(frozen=True)
class PoincareSeries:
    """Integer Betti numbers b_0..b_{degree_max}; the truncation degree is explicit."""

    coefficients: Tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(int(c) for c in self.coefficients))
        if any(c < 0 for c in self.coefficients):
            raise TopologyError(f"Betti numbers must be nonnegative: {self.coefficients}")

    @property
    def degree_max(self) -> int:
        return len(self.coefficients) - 1

    def __getitem__(self, degree: int) -> int:
        return self.coefficients[degree] if 0 <= degree <= self.degree_max else 0

    def __mul__(self, other: "PoincareSeries") -> "PoincareSeries":
        """Kunneth product truncated at the smaller degree_max."""
        top = min(self.degree_max, other.degree_max)
        out = [0] * (top + 1)
        for i, a in enumerate(self.coefficients[: top + 1]):
            if a:
                for j, b in enumerate(other.coefficients[: top + 1 - i]):
                    out[i + j] += a * b
        label = f"{self.label} (x) {other.label}" if self.label and other.label else self.label or other.label
        return PoincareSeries(tuple(out), label)

    def truncated(self, degree_max: int) -> "PoincareSeries":
        coeffs = list(self.coefficients[: degree_max + 1])
        coeffs += [0] * (degree_max + 1 - len(coeffs))
        return PoincareSeries(tuple(coeffs), self.label)

    def odd_vanishing(self) -> bool:
        return all(c == 0 for c in self.coefficients[1::2])

    def is_palindromic(self) -> bool:
        coeffs = list(self.coefficients)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        return coeffs == coeffs[::-1]

    def total(self) -> int:
        return sum(self.coefficients)

    def __str__(self) -> str:
        terms = []
        for d, c in enumerate(self.coefficients):
            if c == 0:
                continue
            mono = "1" if d == 0 else ("t" if d == 1 else f"t^{d}")
            terms.append(mono if c == 1 and d else f"{c}{'' if d == 0 else mono}")
        return " + ".join(terms) if terms else "0"

    def to_dict(self) -> Dict[str, Any]:
        return {"label": self.label, "degree_max": self.degree_max, "coefficients": list(self.coefficients)}


def fiber_homotopy_groups(space: SpaceSpec, i_max: int) -> Dict[int, AbelianGroupExpr]:
    """
    pi_i of the endpoint fiber, i = 0..i_max, from pi_i(fiber) = pi_{i+1}(M).

    Entries beyond the range where a closed form is known are UNKNOWN.
    """
    if i_max < 0:
        raise TopologyError(f"i_max must be >= 0, got {i_max}")
    table: Dict[int, AbelianGroupExpr] = {}
    if space.kind == "su":
        n = space.N
        for i in range(i_max + 1):
            if i > 2 * n - 2:
                table[i] = UNKNOWN
            elif i == 0 or i % 2 == 1:
                table[i] = TRIVIAL
            else:
                table[i] = Z
    elif space.kind == "cp":
        n = space.N
        for i in range(i_max + 1):
            if i > 2 * n - 2:
                table[i] = UNKNOWN
            elif i == 1 or i == 2 * n - 2:
                table[i] = Z
            else:
                table[i] = TRIVIAL
    elif space.kind in ("flag", "grassmannian"):
        if space.kind == "grassmannian":
            nu, n = space.params
            blocks = tuple(b for b in (nu, n - nu) if b > 0)
        else:
            blocks = space.params
        kappa = len(blocks)
        for i in range(i_max + 1):
            if i == 0:
                table[i] = TRIVIAL
            elif i == 1:
                table[i] = AbelianGroupExpr.free(kappa - 1)
            else:
                table[i] = UNKNOWN if kappa > 1 else TRIVIAL
    else:
        raise UnsupportedSpaceError(f"no fiber homotopy table for {space.kind}")
    return table


_t = sp.Symbol("t")


def _q_factorial(n: int) -> sp.Expr:
    return math.prod((1 - _t ** (2 * j) for j in range(1, n + 1)), start=sp.Integer(1))


def grassmannian_poincare(nu: int, n: int, degree_max: Optional[int] = None) -> PoincareSeries:
    """Poincare polynomial of Gr(nu, n) by exact polynomial division."""
    if not (0 <= nu <= n):
        raise MultiplicityError(f"Grassmannian needs 0 <= nu <= n, got ({nu}, {n})")
    numerator = sp.Poly(sp.expand(_q_factorial(n)), _t)
    denominator = sp.Poly(sp.expand(_q_factorial(nu) * _q_factorial(n - nu)), _t)
    quotient, remainder = sp.div(numerator, denominator)
    if not remainder.is_zero:
        raise TopologyError(f"Gr({nu},{n}) Poincare division left a remainder")
    coeffs = [int(c) for c in reversed(quotient.all_coeffs())]
    series = PoincareSeries(tuple(coeffs), f"Gr({nu},{n})")
    top = 2 * nu * (n - nu)
    return series.truncated(top if degree_max is None else degree_max)


def loop_su_series(n: int, degree_max: int) -> PoincareSeries:
    """Coefficients of prod_{j=1}^{N-1} 1 / (1 - t^{2j})."""
    if n < 2:
        raise UnsupportedSpaceError(f"SU(N) needs N >= 2, got {n}")
    coeffs = [1] + [0] * degree_max
    for j in range(1, n):
        step = 2 * j
        for d in range(step, degree_max + 1):
            coeffs[d] += coeffs[d - step]
    return PoincareSeries(tuple(coeffs), f"Omega SU({n})")


def loop_cp_series(n: int, degree_max: int) -> PoincareSeries:
    """(1 + t) / (1 - t^{2N-2}) for Omega CP^{N-1}."""
    if n < 2:
        raise UnsupportedSpaceError(f"CP^(N-1) needs N >= 2, got {n}")
    period = 2 * n - 2
    coeffs = [1 if d % period in (0, 1) else 0 for d in range(degree_max + 1)]
    return PoincareSeries(tuple(coeffs), f"Omega CP^{n - 1}")


def loop_cohomology_ring(space: SpaceSpec) -> str:
    """Presentation of the loop-space (co)homology ring, as documentation text."""
    if space.kind == "su":
        n = space.N
        gens = ", ".join(f"x_{2 * j}" for j in range(1, n))
        return f"H*(Omega SU({n}); Z) = Z[{gens}], deg x_k = k"
    if space.kind == "cp":
        n = space.N
        return (
            f"H*(Omega CP^{n - 1}; Z) = Lambda[x_1] (x) Z[y_1, y_2, ...] / (i! j! y_i y_j = (i+j)! y_(i+j)), "
            f"deg x_1 = 1, deg y_j = j*(2n-2) = {2 * n - 2}j "
            f"(footnote: the generator degree is stated with a lowercase n; read here as n = N = {n})"
        )
    if space.kind == "flag" and all(k == 1 for k in space.params):
        n = space.N
        return (
            f"H_*(Omega F(1,...,1); Z) = H_*(Omega(SU({n})/T^{n - 1}); Z) = "
            f"(T(x_1, ..., x_{n - 1}) (x) Z[y_1, ..., y_{n - 1}]) / "
            f"<x_k^2 = x_p x_q = 2 y_1 for 1 <= k, p, q <= {n - 1}, p != q>, deg x_j = 1, deg y_j = 2j"
        )
    raise UnsupportedSpaceError(f"no published integral loop ring for {space}")


@dataclass(frozen=True)
class GateCriticalManifold:
    """Product of Gr(nu_j, n_j) with its N phase copies e^{2 pi i k / N} C."""

    nu: Tuple[int, ...]
    multiplicities: Tuple[int, ...]
    phase_copies: int

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec.grassmannian_product(zip(self.nu, self.multiplicities))

    @property
    def is_point(self) -> bool:
        return all(v in (0, n) for v, n in zip(self.nu, self.multiplicities))

    @property
    def is_maximal(self) -> bool:
        return all(v == 0 for v in self.nu)

    @property
    def real_dimension(self) -> int:
        return sum(2 * v * (n - v) for v, n in zip(self.nu, self.multiplicities))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "space": str(self.space),
            "nu": list(self.nu),
            "multiplicities": list(self.multiplicities),
            "phase_copies": self.phase_copies,
            "is_point": self.is_point,
            "is_maximal": self.is_maximal,
            "real_dimension": self.real_dimension,
        }


def _check_multiplicities(mults: Sequence[int], n: int, label: str):
    if not mults or any(int(k) < 1 for k in mults):
        raise MultiplicityError(f"{label} multiplicities must be positive integers, got {list(mults)}")
    if sum(mults) != n:
        raise MultiplicityError(f"{label} multiplicities sum to {sum(mults)}, expected N = {n}")


def gate_critical_manifolds(multiplicities: Sequence[int], n: int) -> List[GateCriticalManifold]:
    """All tuples 0 <= nu_j <= n_j for AA^dag with eigenvalue multiplicities n_j (A nonsingular)."""
    mults = tuple(int(k) for k in multiplicities)
    _check_multiplicities(mults, n, "AA^dag")
    out = [
        GateCriticalManifold(nu=tuple(nu), multiplicities=mults, phase_copies=n)
        for nu in itertools.product(*(range(k + 1) for k in mults))
    ]
    logger.debug(f"gate critical manifolds for {mults}: {len(out)} families x {n} phases")
    return out


@dataclass(frozen=True)
class ObservableCriticalManifold:
    """Product of flags F(k_i1, ..., k_is), one factor per eigenspace of rho_0."""

    matrix: Tuple[Tuple[int, ...], ...]

    @property
    def space(self) -> SpaceSpec:
        rows = [tuple(k for k in row if k > 0) for row in self.matrix]
        return SpaceSpec.flag_product(rows)

    def to_dict(self) -> Dict[str, Any]:
        return {"space": str(self.space), "matrix": [list(r) for r in self.matrix]}


def _integer_matrices(rows: Sequence[int], cols: Sequence[int]):
    if not rows:
        if all(c == 0 for c in cols):
            yield ()
        return
    first, rest = rows[0], rows[1:]

    def compositions(total: int, caps: Sequence[int]):
        if not caps:
            if total == 0:
                yield ()
            return
        for k in range(min(total, caps[0]) + 1):
            for tail in compositions(total - k, caps[1:]):
                yield (k,) + tail

    for row in compositions(first, cols):
        remaining = [c - k for c, k in zip(cols, row)]
        for tail in _integer_matrices(rest, remaining):
            yield (row,) + tail


def observable_critical_manifolds(rho_multiplicities: Sequence[int], obs_multiplicities: Sequence[int]) -> List[ObservableCriticalManifold]:
    """Nonnegative integer matrices with row sums n_i and column sums m_j."""
    n_rho = tuple(int(k) for k in rho_multiplicities)
    n_obs = tuple(int(k) for k in obs_multiplicities)
    n = sum(n_rho)
    _check_multiplicities(n_rho, n, "rho_0")
    _check_multiplicities(n_obs, n, "observable")
    return [ObservableCriticalManifold(matrix) for matrix in _integer_matrices(n_rho, n_obs)]


def dynamical_critical_betti(
    crit: Union[GateCriticalManifold, SpaceSpec, Sequence[Tuple[int, int]]],
    n: int,
    degree_max: int,
) -> PoincareSeries:
    """Betti numbers of e^{-1}(C): product of the Grassmannian factors and Omega SU(N)."""
    if isinstance(crit, GateCriticalManifold):
        pairs = list(zip(crit.nu, crit.multiplicities))
    elif isinstance(crit, SpaceSpec):
        if crit.kind == "grassmannian":
            pairs = [tuple(crit.params)]
        elif crit.kind == "grassmannian_product":
            pairs = [tuple(f.params) for f in crit.factors]
        else:
            raise UnsupportedSpaceError(f"dynamical Betti numbers need Grassmannian factors, got {crit.kind}")
    else:
        pairs = [tuple(p) for p in crit]
    series = loop_su_series(n, degree_max)
    for nu, k in pairs:
        series = grassmannian_poincare(nu, k, degree_max) * series
    return PoincareSeries(series.coefficients, f"e^-1({' x '.join(f'Gr({a},{b})' for a, b in pairs) or 'pt'})")


def component_count(c: int, space: SpaceSpec) -> int:
    """Dynamical component count equals the kinematic count c for connected fibers."""
    if space.kind not in ("su", "cp", "flag", "grassmannian"):
        raise UnsupportedSpaceError(f"component counting needs a state manifold, got {space.kind}")
    if c < 0:
        raise TopologyError(f"component count must be >= 0, got {c}")
    return int(c)


def homotopy_rows(space: SpaceSpec, i_max: int) -> List[Dict[str, Any]]:
    anchor_key = "flag" if space.kind == "grassmannian" else space.kind
    return [
        {"table": "fiber_homotopy", "space": str(space), "i": i, "group": str(g), "anchor": ANCHORS[anchor_key]}
        for i, g in fiber_homotopy_groups(space, i_max).items()
    ]


def series_rows(series: PoincareSeries, anchor: str) -> List[Dict[str, Any]]:
    return [
        {"table": "poincare", "space": series.label, "degree": d, "betti": c, "anchor": anchor}
        for d, c in enumerate(series.coefficients)
    ]


def space_report(space: SpaceSpec, i_max: int, degree_max: int) -> Dict[str, Any]:
    """All tables that apply to ``space``, ready for JSON."""
    report: Dict[str, Any] = {"schema": SCHEMA_VERSION, "space": str(space), "i_max": i_max, "degree_max": degree_max}
    rows: List[Dict[str, Any]] = []
    if space.kind in ("su", "cp", "flag", "grassmannian"):
        rows.extend(homotopy_rows(space, i_max))
    if space.kind == "su":
        rows.extend(series_rows(loop_su_series(space.N, degree_max), ANCHORS["loop_su"]))
        report["ring"] = loop_cohomology_ring(space)
    elif space.kind == "cp":
        rows.extend(series_rows(loop_cp_series(space.N, degree_max), ANCHORS["loop_cp"]))
        report["ring"] = loop_cohomology_ring(space)
    elif space.kind == "flag" and all(k == 1 for k in space.params):
        report["ring"] = loop_cohomology_ring(space)
    elif space.kind == "grassmannian":
        nu, n = space.params
        rows.extend(series_rows(grassmannian_poincare(nu, n, degree_max), ANCHORS["grassmannian"]))
    report["rows"] = rows
    logger.info(f"topology report for {space}: {len(rows)} rows")
    return report


def gate_report(multiplicities: Sequence[int], n: int, degree_max: int) -> Dict[str, Any]:
    manifolds = gate_critical_manifolds(multiplicities, n)
    rows = []
    for crit in manifolds:
        entry = crit.to_dict()
        entry["betti"] = list(dynamical_critical_betti(crit, n, degree_max).coefficients)
        entry["anchor"] = ANCHORS["gate_critical"]
        rows.append(entry)
    return {
        "schema": SCHEMA_VERSION,
        "multiplicities": list(multiplicities),
        "N": n,
        "families": len(manifolds),
        "critical_manifolds": len(manifolds) * n,
        "maximal_components": component_count(n, SpaceSpec.su(n)),
        "rows": rows,
        "betti_anchor": ANCHORS["dynamical_betti"],
        "components_anchor": ANCHORS["components"],
    }


def observable_report(rho_multiplicities: Sequence[int], obs_multiplicities: Sequence[int]) -> Dict[str, Any]:
    manifolds = observable_critical_manifolds(rho_multiplicities, obs_multiplicities)
    rows = [dict(m.to_dict(), anchor=ANCHORS["observable_critical"]) for m in manifolds]
    return {
        "schema": SCHEMA_VERSION,
        "rho_multiplicities": list(rho_multiplicities),
        "observable_multiplicities": list(obs_multiplicities),
        "count": len(manifolds),
        "rows": rows,
    }


def rows_to_frame(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    frame = pd.DataFrame(rows)
    for column in frame.columns:
        if frame[column].map(lambda v: isinstance(v, (list, tuple))).any():
            frame[column] = frame[column].map(lambda v: " ".join(map(str, v)) if isinstance(v, (list, tuple)) else v)
    return frame


def write_csv(rows: List[Dict[str, Any]], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows_to_frame(rows).to_csv(path, index=False, lineterminator="\n")
    return path


# Bott's table of pi_k(SU(N)) for small N, used as an independent reference.
SU_HOMOTOPY_REFERENCE: Dict[int, Dict[int, AbelianGroupExpr]] = {
    2: {1: TRIVIAL, 2: TRIVIAL, 3: Z, 4: AbelianGroupExpr(torsion=(2,))},
    3: {1: TRIVIAL, 2: TRIVIAL, 3: Z, 4: TRIVIAL, 5: Z, 6: AbelianGroupExpr(torsion=(6,))},
    4: {1: TRIVIAL, 2: TRIVIAL, 3: Z, 4: TRIVIAL, 5: Z, 6: TRIVIAL, 7: Z, 8: AbelianGroupExpr(torsion=(24,))},
}


def binomial_total(nu: int, n: int) -> int:
    return math.comb(n, nu)
