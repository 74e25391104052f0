import numpy as np
import pytest

from lazynn.core import FeatureSchema
from lazynn.metrics import (
    Histogram,
    MetricConfig,
    average_ranks,
    chebyshev,
    chi_square,
    cosine_similarity,
    heterogeneous,
    jeffrey_divergence,
    kl_divergence,
    minkowski,
    ncd,
    pearson,
    spearman,
    to_distance,
)

A = (1.0, 1.0)
B = (5.0, 1.0)
C = (4.0, 4.0)


class TestMinkowski:
    @pytest.mark.parametrize("p,expected", [(1, 6.0), (2, 4.2426), (3, 3.7798)])
    def test_worked_values(self, p, expected):
        assert minkowski(A, C, p) == pytest.approx(expected, abs=1e-3)

    @pytest.mark.parametrize("p", [1, 2, 3, 7.5])
    def test_single_axis_gap_same_for_all_p(self, p):
        assert minkowski(A, B, p) == pytest.approx(4.0)

    def test_identity(self):
        assert minkowski(C, C, 3) == 0.0

    def test_rejects_p_below_one(self):
        with pytest.raises(ValueError, match=">= 1"):
            minkowski(A, B, 0.5)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError, match="equal length"):
            minkowski([1, 2], [1, 2, 3], 2)

    def test_weights_scale_contributions(self):
        assert minkowski([0, 0], [1, 1], 1, weights=[2.0, 3.0]) == pytest.approx(5.0)

    def test_larger_p_flips_nearest_neighbour(self):
        # B is nearer to A at p in {1, 2}; C overtakes it at p = 3
        for p in (1, 2):
            assert minkowski(A, B, p) < minkowski(A, C, p)
        assert minkowski(A, C, 3) < minkowski(A, B, 3)


class TestChebyshev:
    def test_componentwise_max(self):
        assert chebyshev(A, C) == 3.0
        assert chebyshev(A, B) == 4.0

    def test_identity(self):
        assert chebyshev(B, B) == 0.0

    def test_matches_large_p_minkowski_on_unit_box(self):
        # convergence is geometric in the ratio of the top two gaps, so use
        # vectors with a dominant axis; near-tied gaps converge slower
        rng = np.random.default_rng(5)
        zero = np.zeros(5)
        for _ in range(200):
            gaps = rng.random(5) * 0.2
            gaps[rng.integers(5)] = 0.5 + 0.5 * rng.random()
            assert abs(chebyshev(zero, gaps) - minkowski(zero, gaps, 64)) <= 1e-3

    def test_minkowski_approaches_chebyshev_as_p_grows(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            q, x = rng.random(5), rng.random(5)
            errs = [abs(chebyshev(q, x) - minkowski(q, x, p)) for p in (8, 16, 64)]
            assert errs[0] >= errs[1] >= errs[2]


@pytest.fixture
def mixed_schema():
    return FeatureSchema((("amount", "numeric"), ("colour", "categorical")), "y")


class TestHeterogeneous:
    def test_worked_value(self, mixed_schema):
        d = heterogeneous((0.2, "red"), (0.5, "blue"), mixed_schema)
        assert d == pytest.approx(1.3)

    def test_identity(self, mixed_schema):
        assert heterogeneous((0.2, "red"), (0.2, "red"), mixed_schema) == 0.0

    def test_linear_in_weights(self, mixed_schema):
        one = heterogeneous((0.2, "red"), (0.5, "blue"), mixed_schema, weights=(1, 1))
        two = heterogeneous((0.2, "red"), (0.5, "blue"), mixed_schema, weights=(2, 2))
        assert two == pytest.approx(2 * one)

    def test_kind_mismatch(self, mixed_schema):
        with pytest.raises(ValueError, match="numeric"):
            heterogeneous(("oops", "red"), (0.5, "blue"), mixed_schema)


class TestCosine:
    def test_identity(self):
        assert cosine_similarity([1, 2, 3], [1, 2, 3]).value == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]).value == 0.0

    def test_scale_invariant(self):
        assert cosine_similarity([1, 1], [2, 2]).value == pytest.approx(1.0)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            cosine_similarity([0, 0], [1, 1])

    def test_negative_components_rejected_by_default(self):
        with pytest.raises(ValueError, match="non-negative"):
            cosine_similarity([-1, 2], [1, 1])

    def test_negative_opt_in_widens_range(self):
        score = cosine_similarity([-1, 0], [1, 0], allow_negative=True)
        assert score.value == pytest.approx(-1.0)
        assert score.lo == -1.0


class TestToDistance:
    def test_cosine_one_maps_to_zero(self):
        assert to_distance(cosine_similarity([1, 1], [1, 1])) == pytest.approx(0.0)

    def test_cosine_orthogonal_maps_to_one(self):
        assert to_distance(cosine_similarity([1, 0], [0, 1])) == pytest.approx(1.0)

    def test_correlation_endpoint_modes(self):
        score = pearson([1, 2, 3], [3, 2, 1])
        assert to_distance(score) == pytest.approx(2.0)
        assert to_distance(score, scaled=True) == pytest.approx(1.0)


class TestPearson:
    def test_positive_affine_invariance(self):
        x = np.array([1.0, 4.0, 2.0, 7.0])
        assert pearson(x, 3.5 * x + 2.0).value == pytest.approx(1.0)

    def test_exact_anticorrelation(self):
        assert pearson([1, 2, 3], [3, 2, 1]).value == pytest.approx(-1.0)

    def test_constant_vector_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            pearson([1, 1, 1], [1, 2, 3])


class TestSpearman:
    def test_monotone_transform_invariance(self):
        x = np.array([0.3, 1.8, 0.9, 4.0])
        assert spearman(x, np.exp(x)).value == pytest.approx(1.0)

    def test_reversal(self):
        assert spearman([1, 2, 3, 4], [4, 3, 2, 1]).value == pytest.approx(-1.0)

    def test_tie_ranks_are_averaged(self):
        assert average_ranks([1, 2, 2, 3]).tolist() == [1.0, 2.5, 2.5, 4.0]

    def test_constant_after_ranking_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            spearman([5, 5, 5], [1, 2, 3])


class TestKl:
    def test_identity(self):
        assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_worked_value(self):
        # 0.5*log2(2) + 0.5*log2(2/3)
        assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.20752, abs=1e-4)

    def test_asymmetric(self):
        ab = kl_divergence([0.5, 0.5], [0.25, 0.75])
        ba = kl_divergence([0.25, 0.75], [0.5, 0.5])
        assert ab != pytest.approx(ba)

    def test_counts_are_renormalised(self):
        assert kl_divergence([2, 2], [1, 3]) == pytest.approx(
            kl_divergence([0.5, 0.5], [0.25, 0.75])
        )

    def test_zero_against_mass_is_infinite(self):
        with pytest.raises(ValueError, match="infinite"):
            kl_divergence([0.5, 0.5], [1.0, 0.0])

    def test_bin_mismatch(self):
        with pytest.raises(ValueError, match="bin counts"):
            kl_divergence([1, 1], [1, 1, 1])

    def test_non_negative_over_random_pairs(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            h = rng.random(6) + 1e-6
            k = rng.random(6) + 1e-6
            assert kl_divergence(h, k) >= 0.0


class TestJeffrey:
    def test_identity(self):
        assert jeffrey_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_symmetric_always(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            h = rng.random(5)
            k = rng.random(5)
            h[0] = 0.0  # zero bins stay finite
            assert jeffrey_divergence(h, k) == pytest.approx(jeffrey_divergence(k, h))

    def test_disjoint_support_worked_value(self):
        assert jeffrey_divergence([1, 0], [0, 1]) == pytest.approx(2.0)


class TestChiSquare:
    def test_identity(self):
        assert chi_square([4, 2], [4, 2]) == 0.0

    def test_worked_value(self):
        assert chi_square([4, 2], [2, 6]) == pytest.approx(4.0 / 3.0)

    def test_symmetric_default_form(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            h = rng.integers(0, 10, size=4).astype(float)
            k = rng.integers(0, 10, size=4).astype(float)
            assert chi_square(h, k) == pytest.approx(chi_square(k, h))

    def test_literal_form_matches_hand_value(self):
        # (4-3)/4 + (2-4)/2 = 0.25 - 1.0
        assert chi_square([4, 2], [2, 6], literal=True) == pytest.approx(-0.75)

    def test_histogram_rejects_negative_bins(self):
        with pytest.raises(ValueError, match="non-negative"):
            Histogram(np.array([1.0, -0.5]))


def text_block(n_bytes: int = 4096, seed: int = 4) -> bytes:
    """Deterministic English-like text tiled to ``n_bytes``."""
    import random

    rng = random.Random(seed)
    words = (
        "route ledger parcel depot manifest courier scanner record total queue "
        "signature morning northern southern urgent arrival midnight warehouse "
        "postcode town april pass second faster three mismatched heavier twenty "
        "kilograms needs marked unless reports hour before zero restart logs"
    ).split()
    sentences = [
        (" ".join(rng.choice(words) for _ in range(rng.randint(6, 12))) + ". ").capitalize()
        for _ in range(40)
    ]
    return ("".join(sentences) * (n_bytes // 100)).encode()[:n_bytes]


class TestNcd:
    def test_repetitive_text_scores_near_zero(self):
        x = text_block()
        assert ncd(x, x) <= 0.1

    def test_independent_random_blocks_score_near_one(self):
        rng = np.random.default_rng(12)
        x = rng.bytes(4096)
        y = rng.bytes(4096)
        assert ncd(x, y) >= 0.9

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            ncd(b"", b"abc")

    def test_max_denominator_never_exceeds_min_mode(self):
        x = b"abcabcabc" * 50
        y = b"xyzxyzxyz" * 80
        assert ncd(x, y, denominator="max") <= ncd(x, y, denominator="min")

    def test_compressor_failure_surfaces(self):
        def broken(_):
            raise OSError("boom")

        with pytest.raises(RuntimeError, match="compressor failed"):
            ncd(b"a", b"b", compressor=broken)


class TestMetricAxioms:
    N_TRIPLES = 2000

    def _triples(self, seed, d=4):
        rng = np.random.default_rng(seed)
        return rng.random((self.N_TRIPLES, 3, d))

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_minkowski_axioms(self, p):
        for x, y, z in self._triples(20 + p):
            dxy = minkowski(x, y, p)
            assert dxy >= 0
            assert dxy == pytest.approx(minkowski(y, x, p))
            assert minkowski(x, z, p) <= dxy + minkowski(y, z, p) + 1e-9

    def test_chebyshev_axioms(self):
        for x, y, z in self._triples(30):
            dxy = chebyshev(x, y)
            assert dxy >= 0
            assert dxy == pytest.approx(chebyshev(y, x))
            assert chebyshev(x, z) <= dxy + chebyshev(y, z) + 1e-9

    def test_heterogeneous_axioms(self):
        schema = FeatureSchema(
            (("a", "numeric"), ("b", "numeric"), ("c", "categorical")), "y"
        )
        rng = np.random.default_rng(31)
        colours = ("red", "green", "blue")
        for _ in range(self.N_TRIPLES):
            rows = [
                (rng.random(), rng.random(), colours[rng.integers(3)])
                for _ in range(3)
            ]
            x, y, z = rows
            dxy = heterogeneous(x, y, schema)
            assert dxy >= 0
            assert dxy == pytest.approx(heterogeneous(y, x, schema))
            assert heterogeneous(x, z, schema) <= dxy + heterogeneous(y, z, schema) + 1e-9


def test_similarity_concentrates_in_higher_dimensions():
    rng = np.random.default_rng(40)
    variances = {}
    for d in (5, 20):
        sims = [
            cosine_similarity(rng.random(d), rng.random(d)).value for _ in range(1000)
        ]
        variances[d] = np.var(sims)
    assert variances[20] < variances[5]


def test_metric_config_validation():
    with pytest.raises(ValueError, match="p must be >= 1"):
        MetricConfig("minkowski", p=0.5)
    with pytest.raises(ValueError, match="unknown metric"):
        MetricConfig("mahalanobis")
    assert MetricConfig("minkowski").is_proper_metric
    assert not MetricConfig("cosine").is_proper_metric
