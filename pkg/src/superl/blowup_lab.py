"""Synthetic blow-up families and energy-identity / quantization audits.

A family is indexed by ``n``; every bubble template carries a scale schedule
``lam_n = lambda0 * growth**n`` and the fields at index ``n`` are built from
exact catalog bubbles. Bubble accounts use whole-plane closed forms
(``2pi`` of ``e^{2u}`` per Liouville bubble, ``2pi(1+beta)`` per conical
bubble, ``4pi s^4`` of ``|psi|^4`` per Yamabe bubble), so audit defects
isolate truncation and neck effects from the bubbles themselves.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from .grid import ConfigurationError, Domain, make_grid
from .fields import CouplingField, ScalarField, SpinorField, residuals
from .exact import BubbleParams, bubble_energy, make_bubble
from .diagnostics import local_mass, neck_scan
from .spin2d import DEFAULT_REP

FUNCTION_KINDS = ("liouville", "conical")
FOUR_PI = 4 * math.pi
# neck scans start this many bubble radii away from each centre
NECK_BUBBLE_RADII = 8.0


def thread_count():
    """Worker threads for per-index work (``SUPERL_THREADS``, default 1)."""
    try:
        return max(1, int(os.environ.get("SUPERL_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class BubbleTemplate:
    kind: str
    lambda0: float = 1.0
    growth: float = 2.0
    center: tuple = (0.0, 0.0)
    beta: float = 0.0
    mu: float = -0.5
    sign: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.lambda0 > 0:
            raise ConfigurationError("lambda0 must be positive")
        if not self.growth > 1:
            raise ConfigurationError("scale schedules must be strictly increasing (growth > 1)")

    def scale(self, n):
        return self.lambda0 * self.growth ** n

    def params(self, n):
        return BubbleParams(self.kind, self.scale(n), self.center, self.beta, self.mu, sign=self.sign)

    def to_json(self):
        d = {"kind": self.kind, "lambda0": self.lambda0, "growth": self.growth,
             "center": list(self.center)}
        if self.kind == "conical":
            d["beta"] = self.beta
        if self.kind == "yamabe":
            d["mu"] = self.mu
            if self.sign is not None:
                d["sign"] = self.sign
        return d

    @classmethod
    def from_json(cls, d):
        return cls(d["kind"], float(d.get("lambda0", 1.0)), float(d.get("growth", 2.0)),
                   tuple(d.get("center", (0.0, 0.0))), float(d.get("beta", 0.0)),
                   float(d.get("mu", -0.5)), d.get("sign"))


@dataclass(eq=False)
class FamilySpec:
    """Bubble templates plus the domain, grid spacing and index range.

    ``background`` is a constant level for ``u`` used when no function-kind
    bubble is present (None leaves ``u`` vanished).
    """

    bubbles: list
    domain: Domain
    h: float
    n_range: tuple = (0, 5)
    background: float | None = None

    def __post_init__(self):
        self.bubbles = [b if isinstance(b, BubbleTemplate) else BubbleTemplate.from_json(b)
                        for b in self.bubbles]
        self.n_range = (int(self.n_range[0]), int(self.n_range[1]))
        if not self.bubbles:
            raise ConfigurationError("family needs at least one bubble")
        if self.n_range[1] < self.n_range[0]:
            raise ConfigurationError("empty index range")
        for b in self.bubbles:
            if not self.domain.contains_points(np.array(b.center[0]), np.array(b.center[1])):
                raise ConfigurationError(f"bubble centre {b.center} outside the domain")
        funcs = [b for b in self.bubbles if b.kind in FUNCTION_KINDS]
        if len(funcs) > 1:
            raise ConfigurationError("at most one super-Liouville type bubble per family")
        for i, a in enumerate(self.bubbles):
            for b in self.bubbles[i + 1:]:
                same_place = math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) < 1e-12
                if same_place and a.kind == b.kind and a.growth == b.growth:
                    raise ConfigurationError("overlapping same-kind bubbles at comparable scales")
                if same_place and a.growth == b.growth:
                    raise ConfigurationError("concentric bubbles need separated scale schedules")

    @property
    def indices(self):
        return list(range(self.n_range[0], self.n_range[1] + 1))

    @cached_property
    def grid(self):
        return make_grid(self.domain, self.h)

    def to_json(self):
        d = {"bubbles": [b.to_json() for b in self.bubbles], "domain": self.domain.to_json(),
             "h": self.h, "n_range": list(self.n_range)}
        if self.background is not None:
            d["background"] = self.background
        return d

    @classmethod
    def from_json(cls, d):
        if isinstance(d, str):
            d = json.loads(d)
        return cls([BubbleTemplate.from_json(b) for b in d["bubbles"]], Domain.from_json(d["domain"]),
                   float(d["h"]), tuple(d.get("n_range", (0, 5))), d.get("background"))


def generate_family(spec, n, rep=DEFAULT_REP):
    """Fields ``(u, psi)`` of the family at index ``n``.

    ``u`` is the function-kind bubble (or the background, or vanished) and
    ``psi`` the sum of the Yamabe bubbles.
    """
    lo, hi = spec.n_range
    if not lo <= n <= hi:
        raise ValueError(f"index {n} outside range {spec.n_range}")
    grid = spec.grid
    u = None
    psi = np.zeros((2,) + grid.shape, dtype=complex)
    for b in spec.bubbles:
        bu, bpsi = make_bubble(b.params(n), grid, rep)
        if b.kind in FUNCTION_KINDS:
            u = bu
        else:
            psi += bpsi.values
    if u is None:
        u = (ScalarField.constant(grid, spec.background) if spec.background is not None
             else ScalarField.vanishing(grid))
    return u, SpinorField(grid, psi)


def coupling_term(u, psi):
    """``int e^u |psi|^2`` over the family domain."""
    return u.grid.integrate(u.exp() * psi.norm2())


def _coupling_F(spec):
    mus = {b.mu for b in spec.bubbles if b.kind == "yamabe"}
    return mus.pop() if len(mus) == 1 else 0.0


def system_residual(spec, u, psi, rep=DEFAULT_REP):
    """Relative sup norms of the residuals away from point singularities.

    Each residual is divided by the sup of its nonlinear terms; nodes within
    ``2h`` of a conical tip are excluded.
    """
    grid = u.grid
    F = CouplingField.const(grid, _coupling_F(spec))
    with np.errstate(invalid="ignore"):
        ru, rp = residuals(u, psi, F, rep)
    keep = np.ones(grid.shape, dtype=bool)
    for b in spec.bubbles:
        if b.kind == "conical" and b.beta != 0:
            keep &= grid.radius_from(b.center) > 2 * grid.h
    keep &= grid.interior
    eu = np.nan_to_num(u.exp())
    n2 = psi.norm2()
    r_u = 0.0
    if ru is not None:
        scale_u = np.max((2 * eu * eu + eu * n2)[keep])
        r_u = float(np.nanmax(np.abs(ru.values[keep])) / max(scale_u, 1e-300))
    scale_p = np.max(((eu + 2 * abs(F.values) * n2) * np.sqrt(n2))[keep])
    r_p = float(np.max(np.sqrt(np.sum(np.abs(rp.values) ** 2, axis=0))[keep]) / max(scale_p, 1e-300))
    return r_u, r_p


def bubble_census(spec, u, psi, n):
    """Detect the type of each bubble from the fields in its core ``B_{2/lam_n}``.

    A core dominated by ``e^{2u}`` is super-Liouville type, one dominated by
    ``|psi|^4`` is Yamabe type. Returns ``{"super-Liouville": k, "yamabe": m}``.
    """
    grid = u.grid
    e2u = u.exp(2.0)
    p4 = psi.norm2() ** 2
    census = {"super-Liouville": 0, "yamabe": 0}
    for b in spec.bubbles:
        rho = max(2.0 / b.scale(n), 2 * grid.h)
        core = Domain.disk(rho, b.center)
        w = grid.region_weights(core)
        ef = float(np.sum(w * np.nan_to_num(e2u)))
        es = float(np.sum(w * p4))
        if max(ef, es) <= 0:
            continue
        census["super-Liouville" if ef >= es else "yamabe"] += 1
    return census


def census_label(census):
    return ";".join(f"{k}={v}" for k, v in census.items())


@dataclass
class AuditRow:
    n: int
    scales: list
    total_e2u: float
    total_psi4: float
    account_e2u: float
    account_psi4: float
    defect_e2u: float
    defect_psi4: float
    neck_remainder: float
    truncation_tail: float
    neck_sup: float
    mass: float
    coupling: float
    residual_u: float
    residual_psi: float
    census: dict
    within_ceiling: bool = True


@dataclass
class AuditReport:
    spec: dict
    rows: list = field(default_factory=list)
    neck_delta: float = 0.25
    residual_ceiling: float = 0.25

    @property
    def census(self):
        return self.rows[-1].census if self.rows else {}

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def to_json(self):
        return {"spec": self.spec, "neck_delta": self.neck_delta, "residual_ceiling": self.residual_ceiling,
                "rows": [asdict(r) for r in self.rows], "census": self.census}

    def csv_rows(self):
        return [{"n": r.n, "mass": r.mass, "neck_sup": r.neck_sup, "defect_psi4": r.defect_psi4,
                 "defect_e2u": r.defect_e2u, "label": census_label(r.census)} for r in self.rows]


CSV_AUDIT_HEADER = ("n", "mass", "neck_sup", "defect_psi4", "defect_e2u", "label")


def _accounts(spec, n):
    acc_f = acc_s = tail = 0.0
    dom = spec.domain
    for b in spec.bubbles:
        p = b.params(n)
        whole = bubble_energy(p)
        # largest centred disk inside the domain bounds the truncated energy from below
        d = math.hypot(b.center[0] - dom.center[0], b.center[1] - dom.center[1])
        inner = bubble_energy(p, max(dom.outer_radius - d, 1e-300))
        if b.kind in FUNCTION_KINDS:
            acc_f += whole.e2u_energy
            tail += whole.e2u_energy - inner.e2u_energy
        else:
            acc_s += whole.psi4_energy
            tail += whole.psi4_energy - inner.psi4_energy
    return acc_f, acc_s, tail


def _audit_row(spec, n, neck_delta, ceiling, rep):
    u, psi = generate_family(spec, n, rep)
    grid = spec.grid
    e2u = np.nan_to_num(u.exp(2.0))
    p4 = psi.norm2() ** 2
    tot_f = grid.integrate(e2u)
    tot_s = grid.integrate(p4)
    acc_f, acc_s, tail = _accounts(spec, n)
    neck = 0.0
    neck_sup = 0.0
    for b in spec.bubbles:
        lam = b.scale(n)
        r_in = math.sqrt(neck_delta / lam)
        if r_in < neck_delta:
            ann = Domain.annulus(r_in, neck_delta, b.center)
            if _fits(grid, ann):
                neck += grid.integrate(e2u + p4, ann)
            r_min = max(NECK_BUBBLE_RADII / lam, 2 * grid.h)
            if r_min < neck_delta / 2 and _fits(grid, Domain.disk(neck_delta, b.center)):
                neck_sup = max(neck_sup, neck_scan(u, psi, b.center, r_min, neck_delta).sup)
    funcs = [b for b in spec.bubbles if b.kind in FUNCTION_KINDS]
    center = funcs[0].center if funcs else spec.bubbles[0].center
    mass = local_mass(u, psi, center, neck_delta) if _fits(grid, Domain.disk(neck_delta, center)) \
        else math.nan
    ru, rp = system_residual(spec, u, psi, rep)
    return AuditRow(n, [b.scale(n) for b in spec.bubbles], tot_f, tot_s, acc_f, acc_s,
                    tot_f - acc_f, tot_s - acc_s, neck, tail, neck_sup, mass,
                    coupling_term(u, psi), ru, rp, bubble_census(spec, u, psi, n), max(ru, rp) <= ceiling)


def _fits(grid, region):
    from .grid import region_inside

    return region_inside(region, grid.domain, slack=1e-9 * grid.h)


def energy_identity_audit(spec, n_range=None, neck_delta=0.25, residual_ceiling=0.25, rep=DEFAULT_REP):
    """Per-index totals, closed-form accounts, defects, neck remainders and census.

    ``defect = total - account`` for each density; the neck remainder is the
    energy in ``B_delta \\ B_{sqrt(delta/lam_n)}`` around each bubble and the
    truncation tail is the closed-form energy outside the largest centred disk
    in the domain. Rows whose relative system residual exceeds
    ``residual_ceiling`` are flagged: superposed families are only approximate
    solutions there, and thresholds should not be applied to them.
    """
    idx = spec.indices if n_range is None else list(range(n_range[0], n_range[1] + 1))
    spec.grid  # build weights once before threading
    with ThreadPoolExecutor(max_workers=thread_count()) as ex:
        rows = list(ex.map(lambda n: _audit_row(spec, n, neck_delta, residual_ceiling, rep), idx))
    return AuditReport(spec.to_json(), rows, neck_delta, residual_ceiling)


@dataclass
class QuantizationResult:
    deltas: list
    indices: list
    masses: list
    limit: float
    classification: str

    def to_json(self):
        return asdict(self)


def quantization_audit(spec, center, delta_schedule, rel_tol=0.01, zero_tol=1e-6, rep=DEFAULT_REP):
    """Local masses ``m(n, delta)`` with ``n`` taken at the top of the family index range
    before shrinking ``delta`` (the inner limit in ``n`` is taken first).

    The final value is classified as ``"4pi"``, ``"0"`` or ``"unclassified"``.
    """
    deltas = sorted(float(d) for d in delta_schedule)[::-1]
    n = spec.n_range[1]
    u, psi = generate_family(spec, n, rep)
    masses = [local_mass(u, psi, center, d) for d in deltas]
    limit = masses[-1]
    if abs(limit - FOUR_PI) <= rel_tol * FOUR_PI:
        label = "4pi"
    elif abs(limit) <= zero_tol:
        label = "0"
    else:
        label = "unclassified"
    return QuantizationResult(deltas, [n] * len(deltas), masses, float(limit), label)


# --- canned families -------------------------------------------------------------------


def liouville_family(h=1 / 512, n_max=7, radius=1.0):
    return FamilySpec([BubbleTemplate("liouville", 1.0, 2.0)], Domain.disk(radius), h, (0, n_max))


def yamabe_family(h=1 / 512, n_max=7, radius=1.0, mu=-0.5):
    return FamilySpec([BubbleTemplate("yamabe", 1.0, 2.0, mu=mu)], Domain.disk(radius), h, (0, n_max))


def mixed_family(h=1 / 512, n_max=4, radius=1.0, offset=(0.5, 0.0), mu=-0.5, lambda0=16.0):
    """Liouville bubble at the origin (``lambda0 2^n``) and a Yamabe bubble at
    ``offset`` (``4^n``)."""
    return FamilySpec([BubbleTemplate("liouville", lambda0, 2.0),
                       BubbleTemplate("yamabe", 1.0, 4.0, offset, mu=mu)],
                      Domain.disk(radius), h, (0, n_max))


def canned_family(name, h=1 / 64):
    """Small families with known classifier labels.

    ``bm-a``: a fixed small ``u``; ``bm-b``: ``u_n = -n``; ``bm-c``: Liouville
    bubbles ``lam_n = 2^n`` at the origin (n = 1..40); ``sing-first``:
    Liouville bubbles; ``sing-second``: Yamabe bubbles with vanished ``u``;
    ``sing-mixed``: ``max u_n = n`` with ``max|psi_n| = e^n``.
    """
    from .exact import liouville_bubble, yamabe_bubble

    grid = make_grid(Domain.disk(1.0), h)
    zero = SpinorField.zeros(grid)
    r2 = grid.x ** 2 + grid.y ** 2
    if name == "bm-a":
        u = ScalarField(grid, 0.1 * np.sin(3 * grid.x) * np.cos(2 * grid.y))
        return [(u, zero)] * 5
    if name == "bm-b":
        return [(ScalarField.constant(grid, -n), zero) for n in range(1, 26)]
    if name in ("bm-c", "sing-first"):
        top = 41 if name == "bm-c" else 11
        return [liouville_bubble(2.0 ** n, (0.0, 0.0), grid) for n in range(1, top)]
    if name == "sing-second":
        return [yamabe_bubble(2.0 ** n, -0.5, (1.0, 0.0), None, (0.0, 0.0), grid) for n in range(1, 6)]
    if name == "sing-mixed":
        bump = np.exp(-r2)
        return [(ScalarField(grid, n - r2), SpinorField(grid, np.stack([np.exp(n) * bump, 0 * bump])))
                for n in range(1, 31)]
    raise ValueError(f"unknown canned family {name!r}")


CANNED = ("bm-a", "bm-b", "bm-c", "sing-first", "sing-second", "sing-mixed")
