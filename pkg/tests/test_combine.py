import numpy as np
import pytest

from qudit_bpqm.core.channels import combine
from qudit_bpqm.core.channels.combine import (
    Branch,
    HeraldedEnsemble,
    bit_combine,
    bit_combine_heralded,
    bit_combine_oracle,
    check_combine,
    check_combine_heralded,
    check_combine_oracle,
    ensemble_fidelity,
    ensemble_holevo,
    ensemble_pgm_error,
    fidelity_bound_check,
    heralded_fidelity_bound_check,
    holevo_chain_rule_gap,
)
from qudit_bpqm.core.channels.spectra import (
    EigenList,
    LogBase,
    channel_fidelity,
    eigen_to_gram,
    one_parameter_eigenlist,
    pgm_error,
)
from qudit_bpqm.core.errors import ContractViolation, DimensionMismatch, GuardViolation, InvalidEigenList
from tests.conftest import random_pairs


def test_check_combine_sample_pair(sample_lam):
    ensemble = check_combine(sample_lam, sample_lam)

    assert [b.label for b in ensemble.branches] == [0, 1, 2]
    np.testing.assert_allclose([b.prob for b in ensemble.branches], [0.573333, 0.213333, 0.213333], atol=1e-6)
    np.testing.assert_allclose(ensemble.branches[0].eigenlist.array, [2.81395, 0.09302, 0.09302], atol=1e-5)
    np.testing.assert_allclose(ensemble.branches[1].eigenlist.array, [1.375, 0.25, 1.375], atol=1e-12)
    np.testing.assert_allclose(ensemble.branches[2].eigenlist.array, [1.375, 1.375, 0.25], atol=1e-12)


def test_bit_combine_sample_pair(sample_lam):
    np.testing.assert_allclose(bit_combine(sample_lam, sample_lam).array, [1.72, 0.64, 0.64], atol=1e-12)


def test_check_combine_with_perfect_channel():
    ensemble = check_combine(EigenList(values=[3, 0, 0]), EigenList(values=[1, 1, 1]))
    assert len(ensemble.branches) == 3
    for branch in ensemble.branches:
        m = branch.label
        assert branch.prob == pytest.approx(1 / 3)
        expected = np.zeros(3)
        expected[(-m) % 3] = 3.0
        np.testing.assert_allclose(branch.eigenlist.array, expected, atol=1e-12)


def test_useless_input_yields_useless_branches():
    ensemble = check_combine(EigenList(values=[1, 1, 1]), EigenList(values=[3, 0, 0]))
    assert all(b.eigenlist.values == (3.0, 0.0, 0.0) for b in ensemble.branches)

    merged = check_combine_heralded(
        HeraldedEnsemble.single(EigenList(values=[1, 1, 1])), HeraldedEnsemble.single(EigenList(values=[3, 0, 0]))
    )
    assert len(merged.branches) == 1
    assert merged.branches[0].prob == pytest.approx(1.0)


def test_bit_combine_identities():
    perfect = EigenList(values=[1, 1, 1])
    useless = EigenList(values=[3, 0, 0])
    lam = EigenList(values=[1.9, 0.65, 0.45])

    np.testing.assert_allclose(bit_combine(lam, useless).array, lam.array, atol=1e-12)
    np.testing.assert_allclose(bit_combine(lam, perfect).array, [1, 1, 1], atol=1e-12)


@pytest.mark.parametrize("q", [2, 3, 5, 7])
def test_bit_combine_keeps_one_parameter_form(gen, q):
    for lambda1, lambda2 in gen.uniform(0.0, q, size=(10, 2)):
        out = bit_combine(one_parameter_eigenlist(q, lambda1), one_parameter_eigenlist(q, lambda2))
        off_diagonal = eigen_to_gram(out).array[1:]
        np.testing.assert_allclose(off_diagonal, off_diagonal[0], atol=1e-12)


def test_check_combine_heralded_mixture():
    useless = EigenList(values=[3, 0, 0])
    e1 = HeraldedEnsemble.merged([(0.5, useless), (0.5, EigenList(values=[1, 1, 1]))])
    result = check_combine_heralded(e1, HeraldedEnsemble.single(useless))

    # both halves only produce useless branches, which merge into one
    assert len(result.branches) == 1
    assert result.branches[0].prob == pytest.approx(1.0)
    assert result.branches[0].eigenlist == useless
    assert ensemble_holevo(result) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("q", [2, 3, 5, 8])
def test_combines_close_over_eigen_lists(gen, q):
    for lam1, lam2 in random_pairs(gen, q, 30, sparsity=0.2):
        ensemble = check_combine(lam1, lam2)
        assert sum(b.prob for b in ensemble.branches) == pytest.approx(1.0)
        for branch in ensemble.branches:
            assert sum(branch.eigenlist.values) == pytest.approx(q)
            assert min(branch.eigenlist.values) >= 0.0

        bit = bit_combine(lam1, lam2)
        assert sum(bit.values) == pytest.approx(q)
        assert bit.values == bit_combine(lam2, lam1).values


@pytest.mark.parametrize("q", [2, 3, 5])
def test_check_branches_average_to_second_input(gen, q):
    for lam1, lam2 in random_pairs(gen, q, 20):
        ensemble = check_combine(lam1, lam2)
        average = sum(b.prob * b.eigenlist.array for b in ensemble.branches)
        np.testing.assert_allclose(average, lam2.array[(-np.arange(q)) % q], atol=1e-10)


@pytest.mark.parametrize("q", [2, 3, 5, 7])
def test_holevo_chain_rule(gen, q):
    for lam1, lam2 in random_pairs(gen, q, 30, sparsity=0.2):
        assert abs(holevo_chain_rule_gap(lam1, lam2)) < 1e-9


@pytest.mark.parametrize("q", [2, 3, 5])
def test_check_oracle_matches_closed_form(gen, q):
    for lam1, lam2 in random_pairs(gen, q, 10):
        closed = {b.label: b for b in check_combine(lam1, lam2).branches}
        dense = {b.label: b for b in check_combine_oracle(lam1, lam2).branches}
        assert closed.keys() == dense.keys()
        for m, branch in closed.items():
            assert dense[m].prob == pytest.approx(branch.prob, abs=1e-9)
            np.testing.assert_allclose(dense[m].eigenlist.array, branch.eigenlist.array, atol=1e-8)


@pytest.mark.parametrize("q", [2, 3, 5, 11])
def test_bit_oracle_matches_closed_form(gen, q):
    for lam1, lam2 in random_pairs(gen, q, 20, sparsity=0.2):
        np.testing.assert_allclose(bit_combine_oracle(lam1, lam2).array, bit_combine(lam1, lam2).array, atol=1e-9)


def test_oracle_guards():
    lam = one_parameter_eigenlist(11, 2.0)
    with pytest.raises(GuardViolation):
        check_combine_oracle(lam, lam)
    with pytest.raises(GuardViolation):
        bit_combine_oracle(lam, lam, q_limit=7)


def test_check_oracle_rejects_mixed_branches(sample_lam, monkeypatch):
    scrambled = np.random.default_rng(0).normal(size=(3, 3)) + 1j * np.random.default_rng(1).normal(size=(3, 3))
    monkeypatch.setattr(combine, "canonical_states", lambda lam: scrambled / np.linalg.norm(scrambled, axis=0))
    with pytest.raises(ContractViolation) as excinfo:
        check_combine_oracle(sample_lam, sample_lam)
    assert "purity" in str(excinfo.value)


def test_dimension_mismatch(sample_lam):
    other = EigenList(values=[1.5, 0.5])
    with pytest.raises(DimensionMismatch):
        check_combine(sample_lam, other)
    with pytest.raises(DimensionMismatch):
        bit_combine(sample_lam, other)
    with pytest.raises(DimensionMismatch):
        check_combine_heralded(HeraldedEnsemble.single(sample_lam), HeraldedEnsemble.single(other))


def test_bit_combine_heralded_products():
    e1 = HeraldedEnsemble.merged([(0.5, EigenList(values=[1.5, 0.5])), (0.5, EigenList(values=[1.2, 0.8]))])
    e2 = HeraldedEnsemble.merged([(0.5, EigenList(values=[1.9, 0.1])), (0.5, EigenList(values=[1.6, 0.4]))])

    product = bit_combine_heralded(e1, e2)
    assert [b.prob for b in product.branches] == pytest.approx([0.25] * 4)
    np.testing.assert_allclose(
        [b.eigenlist.values[0] for b in product.branches], [1.45, 1.3, 1.18, 1.12], atol=1e-12
    )


def test_heralded_check_combine_conserves_probability(gen):
    e1 = HeraldedEnsemble.merged([(0.3, lam) for lam, _ in random_pairs(gen, 3, 1)] + [(0.7, EigenList(values=[2, 0.5, 0.5]))])
    e2 = HeraldedEnsemble.single(EigenList(values=[1.9, 0.65, 0.45]))
    result = check_combine_heralded(e1, e2)
    assert sum(b.prob for b in result.branches) == pytest.approx(1.0)
    assert result.q == 3


def test_merged_pools_identical_lists():
    lam = EigenList(values=[2, 1, 0])
    other = EigenList(values=[1, 1, 1])
    ensemble = HeraldedEnsemble.merged([(0.2, lam), (0.5, other), (0.3, lam), (0.0, EigenList(values=[3, 0, 0]))])
    assert [b.eigenlist for b in ensemble.branches] == [lam, other]
    assert [b.prob for b in ensemble.branches] == pytest.approx([0.5, 0.5])


def test_ensemble_validation():
    lam = EigenList(values=[2, 1, 0])
    with pytest.raises(InvalidEigenList):
        HeraldedEnsemble(branches=(Branch(prob=0.4, eigenlist=lam),))
    with pytest.raises(InvalidEigenList):
        HeraldedEnsemble(branches=(Branch(prob=0.0, eigenlist=lam),))
    with pytest.raises(DimensionMismatch):
        HeraldedEnsemble(
            branches=(Branch(prob=0.5, eigenlist=lam), Branch(prob=0.5, eigenlist=EigenList(values=[1, 1])))
        )

    kept = HeraldedEnsemble(branches=(Branch(prob=1.0, eigenlist=lam), Branch(prob=0.0, eigenlist=lam)))
    assert len(kept.branches) == 1


def test_ensemble_measures(sample_lam):
    single = HeraldedEnsemble.single(sample_lam)
    assert ensemble_fidelity(single) == pytest.approx(channel_fidelity(sample_lam))
    assert ensemble_pgm_error(single) == pytest.approx(pgm_error(sample_lam))

    ensemble = check_combine(sample_lam, sample_lam)
    expected = sum(b.prob * pgm_error(b.eigenlist) for b in ensemble.branches)
    assert ensemble_pgm_error(ensemble) == pytest.approx(expected)
    assert 0.0 <= ensemble_holevo(ensemble) <= np.log(3)


def test_half_useless_half_perfect_ensemble():
    ensemble = HeraldedEnsemble.merged([(0.5, EigenList(values=[3, 0, 0])), (0.5, EigenList(values=[1, 1, 1]))])
    assert ensemble_holevo(ensemble, LogBase.Q) == pytest.approx(0.5)
    assert ensemble_fidelity(ensemble) == pytest.approx(0.5)
    assert ensemble_pgm_error(ensemble) == pytest.approx(1 / 3)


def test_ensemble_json_round_trip(sample_lam):
    ensemble = check_combine(sample_lam, sample_lam)
    restored = HeraldedEnsemble.from_json(ensemble.to_json())
    assert [b.prob for b in restored.branches] == [b.prob for b in ensemble.branches]
    assert [b.eigenlist for b in restored.branches] == [b.eigenlist for b in ensemble.branches]


@pytest.mark.parametrize("q", [2, 3, 5, 7])
def test_fidelity_bounds_hold(gen, q):
    for lam1, lam2 in random_pairs(gen, q, 50, sparsity=0.2):
        report = fidelity_bound_check(lam1, lam2)
        assert report.violations() == []
        assert report.bit_fidelity <= report.bit_bound + 1e-9
        assert report.check_fidelity <= report.check_bound + 1e-9


@pytest.mark.parametrize("q", [2, 3, 5])
def test_fidelity_special_case(q):
    lam1 = one_parameter_eigenlist(q, 1.4)
    lam2 = one_parameter_eigenlist(q, 1.9)
    report = fidelity_bound_check(lam1, lam2)

    assert report.special_case
    assert report.bit_fidelity == pytest.approx(report.special_bit_value, abs=1e-12)
    assert report.check_fidelity <= report.special_check_bound + 1e-9


@pytest.mark.parametrize("q", [2, 3, 5, 7])
def test_heralded_fidelity_bounds(gen, q):
    for _ in range(30):
        pairs = random_pairs(gen, q, 2, sparsity=0.2)
        p1, p2 = gen.uniform(0.05, 0.95, size=2)
        e1 = HeraldedEnsemble.merged([(p1, pairs[0][0]), (1 - p1, pairs[0][1])])
        e2 = HeraldedEnsemble.merged([(p2, pairs[1][0]), (1 - p2, pairs[1][1])])
        report = heralded_fidelity_bound_check(e1, e2)
        assert not report.special_case
        assert report.violations() == []
