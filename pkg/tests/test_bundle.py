import json

import numpy as np
import pytest

from lcx import certio
from lcx.bundle import (
    FibrePathology,
    PatchError,
    PatchManifold,
    Section,
    bump_eta,
    bump_g,
    escape_for_parameters,
    f_bundle,
    j_n,
    pullback_rho,
    verify_bundle,
    witness_bundle,
)
from lcx.core import coord, mul, plateau, scale, support_bound, translate, value
from lcx.line import build_line_exprs, escape_value, expected_escape, witness_line
from lcx.topology import SeqSpec, member_W


def manifold(d, count=3):
    return PatchManifold.default(d, count)


@pytest.fixture(scope="module")
def cert_2d():
    P = FibrePathology(manifold(2, 4))
    return witness_bundle(SeqSpec.parse("abs:1"), P, p=1)


# ---------------------------------------------------------------------------
# patch manifold


def test_patch_manifold_invariants():
    M = manifold(2, 3)
    for n in range(3):
        c = M.patches[n].center
        assert np.allclose(value(M.kappa(n), np.array(c)), 0.0)
        assert value(M.cutoff(n), np.array(c)) == 1.0
        y = np.array([0.3, -1.7])
        assert np.allclose(value(M.kappa(n), value(M.kappa_inv(n), y)), y, atol=1e-12)


def test_overlapping_patches_rejected():
    with pytest.raises(PatchError):
        PatchManifold.parse("0,0@1;1.5,0@1", 2)
    with pytest.raises(PatchError):
        PatchManifold.parse("0@-1", 1)
    # touching open cubes are disjoint
    assert len(PatchManifold.parse("0,0@1;2,0@1", 2).patches) == 2


def test_manifold_json_round_trip():
    M = PatchManifold.parse("0,0@1;4,1@0.5", 2)
    assert PatchManifold.from_json(2, M.to_json()) == M


def test_cutoff_support():
    M = manifold(1, 2)
    K = M.patches[1].K[0]
    xs = np.linspace(K[1] + 1e-9, M.patches[1].center[0] + 1.0 - 1e-9, 50)
    assert np.all(value(M.cutoff(1), xs) == 0.0)


# ---------------------------------------------------------------------------
# f on sections


def test_f_of_zero_section():
    P = FibrePathology(manifold(2))
    f = f_bundle(Section.zero(2, 2), P)
    pts = np.random.default_rng(0).uniform(-2, 8, size=(100, 2))
    assert np.all(value(f, pts) == 0.0)


def test_section_only_in_patch_zero():
    M = manifold(1, 3)
    P = FibrePathology(M)
    sigma = j_n(mul(coord(0, 1), plateau(0.5, 1.0)), M, 0, (1.0,))
    xs = np.linspace(-2, 8, 301)
    assert np.allclose(value(f_bundle(sigma, P), xs), 0.0, atol=1e-15)


def test_seam_gluing():
    """Inside U_n but off K_n the patch branch agrees with the off-A value 0."""
    M = manifold(1, 3)
    P = FibrePathology(M)
    rng = np.random.default_rng(1)
    g = scale(0.3, mul(coord(0, 1), plateau(0.4, 0.9)))
    sigma = j_n(g, M, 0, (1.0,)) + j_n(scale(0.7, plateau(0.5, 1.0)), M, 1, (1.0,))
    f = f_bundle(sigma, P)
    for n in (1, 2):
        c, w = M.patches[n].center[0], M.patches[n].halfwidth
        K = M.patches[n].K[0]
        xs = np.concatenate([rng.uniform(c - w, K[0], 50), rng.uniform(K[1], c + w, 50)])
        xs = xs[(xs < K[0]) | (xs > K[1])]
        assert np.max(np.abs(value(f, xs))) <= 1e-13


def test_locality_of_support():
    M = manifold(1, 4)
    P = FibrePathology(M)
    sigma = j_n(mul(coord(0, 1), plateau(0.5, 1.0)), M, 0, (1.0,)) + j_n(scale(0.5, plateau(0.5, 1.0)), M, 2, (1.0,))
    f = f_bundle(sigma, P)
    xs = np.linspace(-2, 11, 2001)
    vals = value(f, xs)
    K2 = M.patches[2].K[0]
    outside = (xs < K2[0]) | (xs > K2[1])
    assert np.max(np.abs(vals[outside])) <= 1e-13
    assert np.max(np.abs(vals[~outside])) > 0


def test_fibre_functional():
    M = manifold(1, 2)
    P = FibrePathology(M, lambda_index=1)
    assert P.v(3) == (0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        FibrePathology(M, 5).lam(Section.zero(1, 2))


# ---------------------------------------------------------------------------
# pullback


def test_pullback_round_trip():
    M = manifold(2, 2)
    gamma = translate(scale(0.8, plateau(0.3, 0.7, 2)), (0.1, -0.1))
    sigma = j_n(gamma, M, 1, (1.0, 2.0))
    back = pullback_rho(sigma, M, 1)
    pts = np.random.default_rng(2).uniform(-1, 1, size=(50, 2))
    assert np.allclose(value(back[0], pts), value(gamma, pts), atol=1e-12)
    assert np.allclose(value(back[1], pts), 2 * value(gamma, pts), atol=1e-12)


def test_pullback_of_zero():
    M = manifold(1, 2)
    back = pullback_rho(Section.zero(1, 1), M, 0)
    assert np.all(value(back[0], np.linspace(-1, 1, 11)) == 0.0)


def test_pullback_tensor_bump_is_bump_of_atan():
    M = manifold(1, 2)
    b = plateau(0.5, 1.0)
    sigma = Section((translate(scale(1.0, plateau(0.1, 0.2)), 3.0),))
    back = pullback_rho(sigma, M, 1)[0]
    ys = np.linspace(-1, 1, 41)
    xs = 3.0 + (2 / np.pi) * np.arctan(ys)
    assert np.allclose(value(back, ys), value(plateau(0.1, 0.2), xs - 3.0), atol=1e-14)
    assert b is not None


def test_pullback_support_violation():
    M = manifold(1, 2)
    with pytest.raises(ValueError):
        pullback_rho(Section((plateau(0.5, 1.0),)), M, 1)


# ---------------------------------------------------------------------------
# witness


def test_witness_2d(cert_2d):
    c = cert_2d
    assert c.k0 == 0 and c.ell == 1
    assert abs(c.escape["value"]) >= 1.0
    assert c.escape["value"] == pytest.approx(expected_escape(c.k0, c.r, c.s, c.m), rel=1e-6)
    assert member_W(c.exprs["gamma_m"], c.k0, 1.0).decision == "inside"
    assert member_W(c.exprs["eta"], 1, 1.0).decision == "inside"
    assert c.regime["passed"]
    doc = json.loads(certio.dumps(c.to_json()))
    for key in ("d", "p", "patches", "per_patch_spec", "ell"):
        assert key in doc
    assert verify_bundle(doc).ok


def test_witness_2d_pulled_back_escape_is_monomial(cert_2d):
    c = cert_2d
    P = c.pathology
    from lcx.core import compose

    pulled = compose(f_bundle(c.sigma, P), P.manifold.kappa_inv(c.ell))
    rho = min(0.25, 1 / (4 * c.m * c.s))
    ys = np.zeros((21, 2))
    ys[:, 0] = np.linspace(-rho, rho, 21)
    want = c.r * c.m * c.s ** (c.k0 + 1) * ys[:, 0] ** (c.k0 + 1)
    assert np.allclose(value(pulled, ys), want, atol=1e-12)


def test_fibre_dimension_does_not_change_escape(cert_2d):
    P = cert_2d.pathology
    c3 = witness_bundle(SeqSpec.parse("abs:1"), P, p=3)
    assert c3.escape["value"] == cert_2d.escape["value"]


def test_one_dimensional_reduction():
    spec = SeqSpec.parse("constant:0:1")
    P = FibrePathology(manifold(1, 3))
    b = witness_bundle(spec, P)
    assert verify_bundle(json.loads(certio.dumps(b.to_json()))).ok
    # same (k0, r, s, m) through the line construction
    line = escape_value(build_line_exprs(b.k0, b.r, 2, b.s, b.m)["gamma_m"], 2, b.k0 + 1)
    assert b.escape["value"] == pytest.approx(line, rel=1e-8)
    assert escape_for_parameters(b.k0, b.r, b.s, b.m, P) == pytest.approx(line, rel=1e-8)
    assert abs(witness_line(spec).escape["value"]) >= 1


def test_higher_k0_witness():
    P = FibrePathology(manifold(1, 4))
    c = witness_bundle(SeqSpec.parse("constant:2:0.5"), P)
    assert c.escape["order"] == 3
    assert c.escape["value"] == pytest.approx(expected_escape(2, c.r, c.s, c.m), rel=1e-6)


def test_too_few_patches():
    with pytest.raises(PatchError):
        witness_bundle(SeqSpec.parse("constant:2:1"), FibrePathology(manifold(1, 3)))


def test_bundle_tamper_rejected(cert_2d):
    doc = json.loads(certio.dumps(cert_2d.to_json()))
    doc["m"] = str(int(doc["m"]) - 1)
    try:
        assert not verify_bundle(doc).ok
    except certio.SchemaError:
        pass


def test_bumps_shape():
    g = bump_g(1, 2)
    assert value(g, np.array([0.3, 0.2])) == pytest.approx(0.09)
    assert support_bound(g) == ((-1.0, 1.0), (-1.0, 1.0))
    assert value(bump_eta(0.5, 1), 0.4) == pytest.approx(0.2)
