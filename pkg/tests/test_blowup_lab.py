import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from superl.blowup_lab import (CANNED, BubbleTemplate, FamilySpec, bubble_census, canned_family,
                               energy_identity_audit, generate_family, liouville_family, mixed_family,
                               quantization_audit, system_residual, yamabe_family)
from superl.exact import liouville_bubble
from superl.grid import ConfigurationError, Domain


def test_generate_matches_exact_bubble():
    spec = liouville_family(h=1 / 64, n_max=6)
    u, psi = generate_family(spec, 5)
    ref, _ = liouville_bubble(32.0, (0, 0), spec.grid)
    assert np.array_equal(u.values, ref.values)
    assert np.all(psi.values == 0)


def test_generate_yamabe_vanished_u():
    spec = yamabe_family(h=1 / 64, n_max=3)
    u, psi = generate_family(spec, 2)
    assert u.vanished
    assert psi.norm2().max() > 0


def test_generate_out_of_range():
    with pytest.raises(ValueError):
        generate_family(liouville_family(h=1 / 64, n_max=3), 4)


@pytest.mark.parametrize("bubbles,n_range", [
    ([BubbleTemplate("liouville"), BubbleTemplate("conical", beta=0.5, center=(0.3, 0))], (0, 3)),
    ([BubbleTemplate("yamabe"), BubbleTemplate("yamabe")], (0, 3)),
    ([BubbleTemplate("liouville"), BubbleTemplate("yamabe")], (0, 3)),
    ([BubbleTemplate("liouville", center=(2.0, 0))], (0, 3)),
    ([], (0, 3)),
    ([BubbleTemplate("liouville")], (3, 1)),
])
def test_spec_validation(bubbles, n_range):
    with pytest.raises(ConfigurationError):
        FamilySpec(bubbles, Domain.disk(1.0), 1 / 64, n_range)


def test_template_growth_validation():
    with pytest.raises(ConfigurationError):
        BubbleTemplate("liouville", growth=1.0)
    with pytest.raises(ConfigurationError):
        BubbleTemplate("liouville", lambda0=0.0)


def test_concentric_separated_schedules_allowed():
    spec = FamilySpec([BubbleTemplate("liouville", 1.0, 2.0), BubbleTemplate("yamabe", 1.0, 4.0)],
                      Domain.disk(1.0), 1 / 64, (0, 2))
    assert len(spec.bubbles) == 2


def test_spec_json_roundtrip():
    spec = mixed_family(h=1 / 64, n_max=2)
    text = json.dumps(spec.to_json())
    back = FamilySpec.from_json(text)
    assert back.to_json() == spec.to_json()
    for n in spec.indices:
        a, b = generate_family(spec, n), generate_family(back, n)
        assert np.array_equal(a[0].values, b[0].values) and np.array_equal(a[1].values, b[1].values)


def test_canned_names():
    for name in CANNED:
        assert len(canned_family(name)) >= 3
    with pytest.raises(ValueError):
        canned_family("nope")


@pytest.fixture(scope="module")
def liouville_audit():
    return energy_identity_audit(liouville_family(h=1 / 256, n_max=5))


@pytest.fixture(scope="module")
def yamabe_audit():
    return energy_identity_audit(yamabe_family(h=1 / 256, n_max=5))


def test_audit_defect_identity(liouville_audit, yamabe_audit):
    for rep in (liouville_audit, yamabe_audit):
        for r in rep.rows:
            assert r.defect_e2u == pytest.approx(r.total_e2u - r.account_e2u, abs=1e-14)
            assert r.defect_psi4 == pytest.approx(r.total_psi4 - r.account_psi4, abs=1e-14)


def test_audit_census(liouville_audit, yamabe_audit):
    assert liouville_audit.census == {"super-Liouville": 1, "yamabe": 0}
    assert yamabe_audit.census == {"super-Liouville": 0, "yamabe": 1}


def test_audit_defects_shrink(liouville_audit, yamabe_audit):
    d = np.abs(liouville_audit.column("defect_e2u"))
    assert d[-1] < d[0]
    assert d[-1] / (4 * math.pi) < 1e-2
    d = np.abs(yamabe_audit.column("defect_psi4"))
    assert np.all(np.diff(d) < 0)


def test_audit_rows_are_consistent(liouville_audit):
    rows = liouville_audit.rows
    assert [r.n for r in rows] == list(range(6))
    assert all(r.residual_u < 1e-2 for r in rows)
    assert all(r.coupling == 0 for r in rows)
    assert all(r.truncation_tail >= 0 for r in rows)
    # the account is the whole-plane energy; defect minus tail is quadrature error only
    last = rows[-1]
    assert abs(last.defect_e2u + last.truncation_tail) < 1e-2
    js = json.dumps(liouville_audit.to_json())
    assert "census" in js


def test_audit_csv_rows(yamabe_audit):
    rows = yamabe_audit.csv_rows()
    assert set(rows[0]) == {"n", "mass", "neck_sup", "defect_psi4", "defect_e2u", "label"}
    assert rows[0]["label"] == "super-Liouville=0;yamabe=1"


def test_audit_threading_deterministic(monkeypatch):
    spec = liouville_family(h=1 / 64, n_max=3)
    monkeypatch.setenv("SUPERL_THREADS", "1")
    a = energy_identity_audit(spec).to_json()
    monkeypatch.setenv("SUPERL_THREADS", "4")
    b = energy_identity_audit(spec).to_json()
    assert json.dumps(a) == json.dumps(b)


def test_mixed_census_and_coupling():
    spec = mixed_family(h=1 / 256, n_max=3)
    for n in spec.indices:
        u, psi = generate_family(spec, n)
        assert bubble_census(spec, u, psi, n) == {"super-Liouville": 1, "yamabe": 1}
    rep = energy_identity_audit(spec)
    c = rep.column("coupling")
    assert c[-1] < c[0]


def test_quantization_labels():
    q = quantization_audit(liouville_family(h=1 / 256, n_max=7), (0, 0), [0.5, 0.25, 0.125])
    assert q.classification == "4pi"
    assert q.masses == sorted(q.masses, reverse=True)
    q = quantization_audit(yamabe_family(h=1 / 256, n_max=5), (0, 0), [0.5, 0.25])
    assert q.classification == "0" and q.limit == 0.0
    q = quantization_audit(liouville_family(h=1 / 256, n_max=0), (0, 0), [0.5, 0.25])
    assert q.classification == "unclassified"


def test_system_residual_relative():
    spec = yamabe_family(h=1 / 128, n_max=2)
    u, psi = generate_family(spec, 2)
    ru, rp = system_residual(spec, u, psi)
    assert ru == 0.0
    assert rp < 5e-2


def test_residual_ceiling_flags_rows():
    spec = mixed_family(h=1 / 128, n_max=2)
    strict = energy_identity_audit(spec, residual_ceiling=1e-3)
    loose = energy_identity_audit(spec, residual_ceiling=10.0)
    assert not any(strict.column("within_ceiling"))
    assert all(loose.column("within_ceiling"))
    assert strict.to_json()["residual_ceiling"] == 1e-3
    # superposition error shrinks as the scales separate
    r = strict.column("residual_psi")
    assert r[-1] < r[0]


def test_defect_bounded_by_neck_and_tail(liouville_audit, yamabe_audit):
    for rep in (liouville_audit, yamabe_audit):
        for r in rep.rows:
            d = abs(r.defect_e2u) + abs(r.defect_psi4)
            assert d <= r.neck_remainder + r.truncation_tail + 1e-3


def test_defects_monotone_once_scales_separate(liouville_audit):
    d = np.abs(liouville_audit.column("defect_e2u"))[4:]
    assert np.all(np.diff(d) < 0)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(["liouville", "conical", "yamabe"]),
       lam=st.floats(0.1, 100), growth=st.floats(1.01, 8),
       cx=st.floats(-0.5, 0.5), cy=st.floats(-0.5, 0.5),
       beta=st.floats(0, 0.9), mu=st.sampled_from([-0.5, 0.25]),
       lo=st.integers(0, 5), span=st.integers(0, 5))
def test_spec_json_roundtrip_property(kind, lam, growth, cx, cy, beta, mu, lo, span):
    spec = FamilySpec([BubbleTemplate(kind, lam, growth, (cx, cy), beta, mu)], Domain.disk(1.0), 1 / 64,
                      (lo, lo + span))
    back = FamilySpec.from_json(json.dumps(spec.to_json()))
    assert back.to_json() == spec.to_json()
    assert back.indices == list(range(lo, lo + span + 1))
