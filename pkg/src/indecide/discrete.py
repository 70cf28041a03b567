"""Exact minimax abstention rules on finite-support distributions.

Every atom carries per-class mass w_1..w_K (the joint density values times
class priors).  The minimax rule at abstention mass gamma abstains where the
normalized max score is smallest, splitting one boundary atom fractionally;
the type I / type II variant places two thresholds on the class-1 posterior.
An exhaustive verifier searches all subsets plus one fractional atom each and
serves as the test oracle for all three rule constructions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations

__all__ = [
    "DegenerateAtomError",
    "InfeasibleConstraintError",
    "SizeLimitError",
    "DiscreteJoint",
    "IndecisionRule",
    "NpRuleDiscrete",
    "eta_of",
    "oracle_binary",
    "oracle_np",
    "oracle_multiclass",
    "brute_force_min",
]

_MASS_TOL = 1e-12
_BRUTE_FORCE_MAX_ATOMS = 12


class DegenerateAtomError(ValueError):
    """An atom has zero total mass, so its posterior is undefined."""


class InfeasibleConstraintError(ValueError):
    """No rule satisfies the requested error/abstention constraints."""


class SizeLimitError(ValueError):
    """Instance too large for exhaustive search."""


@dataclass(frozen=True)
class DiscreteJoint:
    """Finite-support joint distribution: per-atom per-class masses.

    points[i] is the weight vector (w_1, ..., w_K) of atom i; all weights
    are nonnegative and the grand total is 1 within 1e-12.
    """

    points: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("need at least 2 atoms")
        k = len(self.points[0])
        if k < 2:
            raise ValueError("need at least 2 classes")
        total = 0.0
        for weights in self.points:
            if len(weights) != k:
                raise ValueError("all atoms must have the same class count")
            if any(w < 0 for w in weights):
                raise ValueError("weights must be nonnegative")
            total += sum(weights)
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"total mass {total!r} != 1 beyond tolerance")

    @property
    def n_classes(self) -> int:
        return len(self.points[0])

    @property
    def n_atoms(self) -> int:
        return len(self.points)

    def to_csv(self, path) -> None:
        """One row per atom: id, w_1..w_K."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id"] + [f"w_{j + 1}" for j in range(self.n_classes)])
            for i, weights in enumerate(self.points):
                writer.writerow([i] + [format(w, ".17g") for w in weights])

    @classmethod
    def from_csv(cls, path) -> "DiscreteJoint":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0] != "id" or len(header) < 3:
                raise ValueError(f"expected header id,w_1,...,w_K, got {header!r}")
            rows = sorted(reader, key=lambda r: int(r[0]))
            points = tuple(tuple(float(v) for v in row[1:]) for row in rows)
        return cls(points)


@dataclass(frozen=True)
class IndecisionRule:
    """Per-atom action for the minimax rule at a given abstention mass.

    action[i] is "decide" or "abstain"; plateau_fraction[i] in [0, 1] is the
    share of atom i's mass sent to abstention (nonzero only on the single
    boundary atom that straddles the gamma budget).
    """

    action: tuple[str, ...]
    plateau_fraction: tuple[float, ...]

    def abstained_mass(self, joint: DiscreteJoint) -> float:
        total = 0.0
        for i, weights in enumerate(joint.points):
            mass = sum(weights)
            if self.action[i] == "abstain":
                total += mass
            else:
                total += self.plateau_fraction[i] * mass
        return total


@dataclass(frozen=True)
class NpRuleDiscrete:
    """Two-threshold rule on the class-1 posterior for a discrete instance.

    label[i] in {"1", "2", "abstain"}; fraction_to_2 / fraction_to_abstain
    split the (at most two) boundary atoms' mass fractionally, the remainder
    of a split atom falling to the next region up (abstain above the class-2
    block, class 1 above the abstention block).
    """

    tau1: float
    tau2: float
    label: tuple[str, ...]
    fraction_to_2: tuple[float, ...]
    fraction_to_abstain: tuple[float, ...]


def eta_of(weights) -> tuple[float, ...]:
    """Normalize an atom's class weights into a posterior vector."""
    total = float(sum(weights))
    if total <= 0.0:
        raise DegenerateAtomError(f"atom with zero total mass: {tuple(weights)!r}")
    return tuple(float(w) / total for w in weights)


def _confidence(weights) -> float:
    """Normalized max score max_i w_i / sum_i w_i of one atom."""
    return max(eta_of(weights))


def _abstention_order(joint: DiscreteJoint) -> list[int]:
    """Atom ids sorted by (confidence ascending, id ascending).

    The minimax rule abstains on a prefix of this order; ties (plateaus) are
    broken by id so reruns pick the same boundary atom.
    """
    return sorted(range(joint.n_atoms), key=lambda i: (_confidence(joint.points[i]), i))


def _prefix_abstention_rule(joint: DiscreteJoint, gamma: float) -> IndecisionRule:
    """Abstain on the lowest-confidence prefix of total mass exactly gamma."""
    order = _abstention_order(joint)
    action = ["decide"] * joint.n_atoms
    fraction = [0.0] * joint.n_atoms
    remaining = gamma
    for i in order:
        mass = sum(joint.points[i])
        if remaining <= _MASS_TOL:
            break
        if mass <= remaining + _MASS_TOL:
            action[i] = "abstain"
            remaining -= mass
        else:
            fraction[i] = remaining / mass
            remaining = 0.0
            break
    return IndecisionRule(action=tuple(action), plateau_fraction=tuple(fraction))


def _rule_risk(joint: DiscreteJoint, rule: IndecisionRule, gamma: float) -> float:
    """Conditional misclassification risk of an argmax-on-decided rule."""
    if gamma >= 1.0 - _MASS_TOL:
        return 0.0
    missed = 0.0
    for i, weights in enumerate(joint.points):
        if rule.action[i] == "abstain":
            continue
        decided_share = 1.0 - rule.plateau_fraction[i]
        missed += decided_share * (sum(weights) - max(weights))
    return missed / (1.0 - gamma)


def oracle_multiclass(joint: DiscreteJoint, gamma: float) -> tuple[IndecisionRule, float]:
    """Minimax rule at abstention mass gamma; decided atoms predict argmax.

    Abstains where the normalized max score is smallest, fractionally at the
    boundary; risk = 1 - (decided max-score mass) / (1 - gamma).
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma!r}")
    rule = _prefix_abstention_rule(joint, gamma)
    return rule, _rule_risk(joint, rule, gamma)


def oracle_binary(joint: DiscreteJoint, gamma: float) -> tuple[IndecisionRule, float]:
    """Binary specialization: abstain where min(eta, 1-eta) is largest."""
    if joint.n_classes != 2:
        raise ValueError("oracle_binary requires exactly 2 classes")
    return oracle_multiclass(joint, gamma)


def oracle_np(
    joint: DiscreteJoint, alpha1: float, gamma: float
) -> tuple[NpRuleDiscrete, float]:
    """Minimax type-II rule under an exact type-I constraint.

    Sorted by class-1 posterior ascending, the rule labels a bottom block
    class 2 (class-1 mass in it exactly alpha1 * (1 - gamma)), abstains on
    the next block (mass exactly gamma), and labels the rest class 1.  Both
    block boundaries may split one atom fractionally.  Returns the rule and
    its conditional type II error.
    """
    if joint.n_classes != 2:
        raise ValueError("oracle_np requires exactly 2 classes")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma!r}")
    if not 0.0 <= alpha1 <= 1.0:
        raise ValueError(f"alpha1 must lie in [0, 1], got {alpha1!r}")
    n = joint.n_atoms
    class1_total = sum(w[0] for w in joint.points)
    budget1 = alpha1 * (1.0 - gamma)
    if budget1 > class1_total + _MASS_TOL:
        raise InfeasibleConstraintError(
            f"type-I budget {budget1!r} exceeds class-1 mass {class1_total!r}"
        )
    order = sorted(range(n), key=lambda i: (eta_of(joint.points[i])[0], i))

    label = ["1"] * n
    frac2 = [0.0] * n
    frac_abstain = [0.0] * n

    # class-2 block: consume exactly budget1 of class-1 mass from the bottom
    remaining1 = budget1
    pos = 0
    carry_abstain_start = 0.0  # fraction of the straddling atom left above the class-2 cut
    carry_atom = -1
    while pos < n and remaining1 > _MASS_TOL:
        i = order[pos]
        w1 = joint.points[i][0]
        if w1 <= remaining1 + _MASS_TOL:
            label[i] = "2"
            frac2[i] = 1.0
            remaining1 -= w1
            pos += 1
        else:
            f = remaining1 / w1
            frac2[i] = f
            carry_abstain_start = 1.0 - f
            carry_atom = i
            remaining1 = 0.0
            break

    # abstention block: exactly gamma of total mass, starting with any
    # leftover fraction of the straddling atom
    remaining_g = gamma
    if carry_atom >= 0:
        i = carry_atom
        mass_left = carry_abstain_start * sum(joint.points[i])
        if mass_left <= remaining_g + _MASS_TOL:
            frac_abstain[i] = carry_abstain_start
            label[i] = "2"  # atom split between class 2 and abstention only
            remaining_g -= mass_left
            pos += 1
        else:
            frac_abstain[i] = remaining_g / sum(joint.points[i])
            label[i] = "2"
            remaining_g = 0.0
            pos += 1
            # remainder of this atom is labeled 1 implicitly via fractions
    while pos < n and remaining_g > _MASS_TOL:
        i = order[pos]
        mass = sum(joint.points[i])
        if mass <= remaining_g + _MASS_TOL:
            label[i] = "abstain"
            frac_abstain[i] = 1.0
            remaining_g -= mass
            pos += 1
        else:
            label[i] = "1"  # partially abstained atom, remainder decided 1
            frac_abstain[i] = remaining_g / mass
            remaining_g = 0.0
            pos += 1
            break

    if remaining_g > 1e-9:
        raise InfeasibleConstraintError(
            f"cannot place abstention mass gamma={gamma!r} above the type-I block"
        )

    # thresholds for reporting: eta at the top of each block
    etas = [eta_of(joint.points[i])[0] for i in range(n)]
    block2 = [i for i in range(n) if frac2[i] > 0.0]
    blocka = [i for i in range(n) if frac_abstain[i] > 0.0]
    tau1 = max((etas[i] for i in block2), default=0.0)
    tau2 = max((etas[i] for i in blocka), default=tau1)
    tau2 = max(tau1, tau2)

    # type II error: class-2 mass decided as class 1, over decided mass share
    missed2 = 0.0
    for i in range(n):
        share_1 = 1.0 - frac2[i] - frac_abstain[i]
        missed2 += max(share_1, 0.0) * joint.points[i][1]
    type2 = missed2 / (1.0 - gamma)
    rule = NpRuleDiscrete(
        tau1=tau1,
        tau2=tau2,
        label=tuple(label),
        fraction_to_2=tuple(frac2),
        fraction_to_abstain=tuple(frac_abstain),
    )
    return rule, type2


def _np_linear_program(joint: DiscreteJoint, gamma: float, alpha1: float) -> float:
    """Exact global minimum of the type-II objective over randomized rules.

    Decision variables per atom: fraction sent to class 2 and fraction
    abstained (remainder is class 1).  Two equality constraints — abstained
    mass = gamma, class-1 mass labeled 2 = alpha1 * (1 - gamma) — and box
    constraints; the linear program is solved exactly, so optima that split
    two different atoms fractionally (one at each threshold) are covered.
    """
    from scipy.optimize import linprog

    n = joint.n_atoms
    w1 = [p[0] for p in joint.points]
    w2 = [p[1] for p in joint.points]
    masses = [sum(p) for p in joint.points]
    # variables x = [q2_0..q2_{n-1}, q0_0..q0_{n-1}]
    cost = [-v for v in w2] + [-v for v in w2]  # minimize decided-1 class-2 mass
    a_eq = [
        [0.0] * n + masses,  # abstention mass
        w1 + [0.0] * n,  # type-I mass
    ]
    b_eq = [gamma, alpha1 * (1.0 - gamma)]
    # q2_i + q0_i <= 1
    a_ub = [[1.0 if j == i or j == n + i else 0.0 for j in range(2 * n)] for i in range(n)]
    result = linprog(
        c=cost,
        A_eq=a_eq,
        b_eq=b_eq,
        A_ub=a_ub,
        b_ub=[1.0] * n,
        bounds=[(0.0, 1.0)] * (2 * n),
        method="highs",
    )
    if not result.success:
        raise InfeasibleConstraintError(
            f"no rule meets abstention {gamma!r} with type-I level {alpha1!r}"
        )
    missed2 = sum(w2) + result.fun  # total class-2 mass minus (labeled 2 or abstained)
    return max(missed2, 0.0) / (1.0 - gamma)


def brute_force_min(
    joint: DiscreteJoint, gamma: float, constraint: float | None = None
) -> float:
    """Global minimum risk at abstention mass exactly gamma, independently.

    Without a constraint: exhaustively searches every subset of fully
    abstained atoms plus one fractionally abstained boundary atom (complete,
    because a single mass equality admits optima with at most one fractional
    atom) and minimizes the conditional misclassified mass of the argmax
    rule.  With constraint = alpha1: minimizes conditional type II mass
    subject to decided class-1 mass labeled 2 equal to alpha1 * (1 - gamma)
    exactly, solved as an exact linear program since the second equality
    allows two fractional atoms.
    """
    n = joint.n_atoms
    if n > _BRUTE_FORCE_MAX_ATOMS:
        raise SizeLimitError(f"{n} atoms exceeds the exhaustive-search limit")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma!r}")
    if constraint is not None:
        if joint.n_classes != 2:
            raise ValueError("type-I constraint requires 2 classes")
        return _np_linear_program(joint, gamma, constraint)
    masses = [sum(w) for w in joint.points]
    best = math.inf
    ids = range(n)
    for r in range(n + 1):
        for subset in combinations(ids, r):
            sub_mass = sum(masses[i] for i in subset)
            if sub_mass > gamma + _MASS_TOL:
                continue
            shortfall = gamma - sub_mass
            boundary_options: list[tuple[int | None, float]]
            if shortfall <= _MASS_TOL:
                boundary_options = [(None, 0.0)]
            else:
                boundary_options = [
                    (j, shortfall / masses[j])
                    for j in ids
                    if j not in subset and masses[j] > shortfall + _MASS_TOL
                ]
            for j, frac in boundary_options:
                missed = 0.0
                for i in ids:
                    if i in subset:
                        continue
                    share = 1.0 - frac if i == j else 1.0
                    missed += share * (masses[i] - max(joint.points[i]))
                value = missed / (1.0 - gamma)
                if value < best:
                    best = value
    if not math.isfinite(best):
        raise InfeasibleConstraintError("no abstention set has mass exactly gamma")
    return best
