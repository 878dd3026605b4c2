import numpy as np
import pytest

from qudit_bpqm.core.channels import unitaries
from qudit_bpqm.core.channels.combine import HeraldedEnsemble, check_combine
from qudit_bpqm.core.channels.spectra import EigenList, dft_matrix, one_parameter_eigenlist
from qudit_bpqm.core.channels.unitaries import (
    UnitaryBundle,
    UnitaryKind,
    bit_zeta_vectors,
    build_bit_unitary,
    build_check_unitary,
    build_controlled_bit_unitary,
    build_controlled_check_unitary,
    check_unitary_branches,
    conjugate_unitary,
    controlled_pairs,
    dump_matrix,
    fourier_permutation_unitary,
    haar_unitary,
    load_matrix,
    unitarity_residual,
    verify_contract,
)
from qudit_bpqm.core.errors import ContractViolation, DegenerateBranch, DimensionMismatch, GuardViolation, NotUnitary
from tests.conftest import random_pairs


@pytest.mark.parametrize("q", [2, 3, 5, 7])
def test_check_unitary_contract(q):
    bundle = build_check_unitary(q)
    assert bundle.kind == UnitaryKind.CHECK
    assert unitarity_residual(bundle.matrix) < 1e-10
    assert verify_contract(bundle) < 1e-9


@pytest.mark.parametrize("q", [2, 3, 5])
def test_fourier_addition_is_a_basis_permutation(q):
    u_tilde = fourier_permutation_unitary(q, lambda j, jp: (j + jp, -jp))
    magnitudes = np.abs(u_tilde)
    np.testing.assert_allclose(magnitudes, np.round(magnitudes), atol=1e-10)
    np.testing.assert_allclose(magnitudes.sum(axis=0), 1.0, atol=1e-10)
    np.testing.assert_allclose(magnitudes.sum(axis=1), 1.0, atol=1e-10)


def test_check_unitary_guard():
    with pytest.raises(GuardViolation):
        build_check_unitary(11)
    assert build_check_unitary(11, q_limit=11).q == 11


@pytest.mark.parametrize("q", [2, 3, 5])
def test_check_unitary_branches_match_closed_form(gen, q):
    bundle = build_check_unitary(q)
    for lam1, lam2 in random_pairs(gen, q, 5):
        closed = {b.label: b for b in check_combine(lam1, lam2).branches}
        measured = {b.label: b for b in check_unitary_branches(lam1, lam2, bundle).branches}
        assert measured.keys() == closed.keys()
        for m, branch in closed.items():
            assert measured[m].prob == pytest.approx(branch.prob, abs=1e-9)
            np.testing.assert_allclose(measured[m].eigenlist.array, branch.eigenlist.array, atol=1e-8)


@pytest.mark.parametrize("q", [2, 3, 5, 7])
def test_bit_unitary_contract(gen, q):
    for lam1, lam2 in random_pairs(gen, q, 5, sparsity=0.2):
        bundle = build_bit_unitary(lam1, lam2)
        assert bundle.inputs == ((lam1, lam2),)
        assert verify_contract(bundle) < 1e-9


def test_bit_zeta_norms_carry_the_output_list(sample_lam):
    norms = np.linalg.norm(bit_zeta_vectors(sample_lam, sample_lam), axis=0) ** 2
    np.testing.assert_allclose(norms, 3 * np.array([1.72, 0.64, 0.64]), atol=1e-12)


def test_degenerate_bit_branches():
    useless = EigenList(values=[3, 0, 0])
    bundle = build_bit_unitary(useless, useless)
    assert verify_contract(bundle) < 1e-9

    with pytest.raises(DegenerateBranch):
        build_bit_unitary(useless, useless, strict=True)


def test_bit_unitary_build_checks_its_contract(sample_lam, monkeypatch):
    monkeypatch.setattr(unitaries, "bit_reflection", lambda zeta, strict=False: np.eye(zeta.shape[0]))
    with pytest.raises(ContractViolation):
        build_bit_unitary(sample_lam, sample_lam)


def test_bit_unitary_rejects_mixed_q(sample_lam):
    with pytest.raises(DimensionMismatch):
        build_bit_unitary(sample_lam, EigenList(values=[1.5, 0.5]))


def test_bundle_validation():
    with pytest.raises(NotUnitary):
        UnitaryBundle(q=2, matrix=2 * np.eye(4), kind=UnitaryKind.CHECK)
    with pytest.raises(DimensionMismatch):
        UnitaryBundle(q=2, matrix=np.eye(6), kind=UnitaryKind.CHECK)


def test_broken_contract_is_reported(sample_lam):
    bundle = build_bit_unitary(sample_lam, sample_lam)
    wrong = bundle.model_copy(update={"inputs": ((sample_lam, EigenList(values=[1.9, 0.65, 0.45])),)})
    with pytest.raises(ContractViolation) as excinfo:
        verify_contract(wrong)
    assert excinfo.value.residual > 1e-9


def test_conjugation_by_identity_is_a_no_op(sample_lam):
    bundle = build_bit_unitary(sample_lam, sample_lam)
    conjugated = conjugate_unitary(bundle, np.eye(3))
    np.testing.assert_allclose(conjugated.matrix, bundle.matrix, atol=1e-12)


@pytest.mark.parametrize("q", [2, 3, 5])
def test_conjugated_unitaries_keep_their_contracts(gen, q):
    lam1, lam2 = random_pairs(gen, q, 1)[0]
    for v in (dft_matrix(q), haar_unitary(gen, q)):
        check = conjugate_unitary(build_check_unitary(q), v)
        bit = conjugate_unitary(build_bit_unitary(lam1, lam2), v)
        np.testing.assert_allclose(check.rotation, v, atol=1e-12)
        assert verify_contract(check) < 1e-9
        assert verify_contract(bit) < 1e-9


def test_conjugation_rejects_bad_matrices(sample_lam):
    bundle = build_bit_unitary(sample_lam, sample_lam)
    with pytest.raises(NotUnitary):
        conjugate_unitary(bundle, 2 * np.eye(3))
    with pytest.raises(DimensionMismatch):
        conjugate_unitary(bundle, np.eye(2))
    with pytest.raises(DimensionMismatch):
        conjugate_unitary(build_controlled_check_unitary(3, 2), np.eye(3))


def test_single_label_controlled_unitary_is_the_plain_one(sample_lam):
    plain = build_bit_unitary(sample_lam, sample_lam)
    controlled = build_controlled_bit_unitary([(sample_lam, sample_lam)])
    assert controlled.labels == 1
    np.testing.assert_allclose(controlled.matrix, plain.matrix, atol=1e-12)


def test_controlled_bit_unitary_over_ensembles():
    e1 = HeraldedEnsemble.merged([(0.5, EigenList(values=[1.5, 0.5])), (0.5, EigenList(values=[1.2, 0.8]))])
    e2 = HeraldedEnsemble.merged([(0.5, EigenList(values=[1.9, 0.1])), (0.5, EigenList(values=[1.6, 0.4]))])
    pairs = controlled_pairs(e1, e2)
    assert [p for p, _, _ in pairs] == pytest.approx([0.25] * 4)

    bundle = build_controlled_bit_unitary([(a, b) for _, a, b in pairs])
    assert bundle.labels == 4
    assert bundle.matrix.shape == (16, 16)
    assert verify_contract(bundle) < 1e-9


def test_controlled_check_unitary():
    bundle = build_controlled_check_unitary(3, 4)
    assert bundle.kind == UnitaryKind.CONTROLLED_CHECK
    assert len(bundle.blocks()) == 4
    assert verify_contract(bundle) < 1e-9


def test_controlled_dimension_guard():
    lam = one_parameter_eigenlist(7, 2.0)
    with pytest.raises(GuardViolation):
        build_controlled_bit_unitary([(lam, lam)] * 11)
    with pytest.raises(GuardViolation):
        build_controlled_check_unitary(7, 11)
    with pytest.raises(GuardViolation):
        build_controlled_bit_unitary([])


@pytest.mark.parametrize("suffix", [".npy", ".json"])
def test_dump_and_load_matrix(tmp_path, sample_lam, suffix):
    bundle = build_bit_unitary(sample_lam, sample_lam)
    path = dump_matrix(bundle, tmp_path / f"bit{suffix}")
    np.testing.assert_allclose(load_matrix(path), bundle.matrix, atol=1e-15)


def test_haar_unitary(gen):
    for q in (2, 3, 7):
        assert unitarity_residual(haar_unitary(gen, q)) < 1e-12
