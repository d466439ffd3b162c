"""Model-selection tests on synthesized fits.

All expected p-values are recomputed inline from the chi-square survival
function; selection outcomes are hand-worked from the rule ordering.
"""

import pytest

from precipfit.distributions import Family, MgwParams
from precipfit.estimators import Degeneracy, Fit, FitFailure, Method
from precipfit.selection import (
    CANDIDATE_KEYS,
    LrtStatus,
    SelectionRule,
    aic,
    degrees_of_freedom,
    display_label,
    free_parameter_count,
    lrt,
    run_lrts,
    select_model,
)
from precipfit.special import chi_square_sf

PARAMS = MgwParams(p=0.5, alpha=1.2, beta=3.0, k=1.1, lam=5.0)


def mk(family, ll, *, method=Method.ML, deg=Degeneracy.NONE, boundary=False,
       params=PARAMS):
    return Fit(family=family, method=method, params=params, log_lik=ll,
               n=300, degeneracy=deg, mixture_boundary=boundary)


def base(ll=-100.0, deg=Degeneracy.NONE, params=PARAMS):
    return mk(Family.MGW, ll, deg=deg, params=params)


def full_fits(**overrides):
    fits = {
        "exponential_ml": mk(Family.EXPONENTIAL, -112.0),
        "gamma_ml": mk(Family.GAMMA, -108.0),
        "weibull_ml": mk(Family.WEIBULL, -107.0),
        "mixed_exponential_ml": mk(Family.MIXED_EXPONENTIAL, -104.0),
        "mgw_mixture": mk(Family.MGW, -103.0, method=Method.MIXTURE),
    }
    fits.update(overrides)
    return fits


class TestFreeParameterCount:
    @pytest.mark.parametrize("key,fit,expect", [
        ("exponential_ml", mk(Family.EXPONENTIAL, -1), 1),
        ("gamma_ml", mk(Family.GAMMA, -1), 2),
        ("weibull_ml", mk(Family.WEIBULL, -1), 2),
        ("mixed_exponential_ml", mk(Family.MIXED_EXPONENTIAL, -1), 3),
        ("mixed_exponential_ml",
         mk(Family.MIXED_EXPONENTIAL, -1, deg=Degeneracy.A), 1),
        ("mgw_mixture", mk(Family.MGW, -1, method=Method.MIXTURE), 3),
        ("mgw_mixture",
         mk(Family.MGE, -1, method=Method.MIXTURE, deg=Degeneracy.B1), 2),
        ("mgw_mixture",
         mk(Family.MEW, -1, method=Method.MIXTURE, deg=Degeneracy.B2), 2),
        ("mgw_mixture",
         mk(Family.MIXED_EXPONENTIAL, -1, method=Method.MIXTURE,
            deg=Degeneracy.B3), 1),
        ("mgw_ml", base(), 5),
    ])
    def test_counts(self, key, fit, expect):
        assert free_parameter_count(key, fit) == expect

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            free_parameter_count("poisson_ml", base())


class TestDegreesOfFreedom:
    @pytest.mark.parametrize("key,fit,expect", [
        ("exponential_ml", mk(Family.EXPONENTIAL, -1), 4),
        ("gamma_ml", mk(Family.GAMMA, -1), 3),
        ("weibull_ml", mk(Family.WEIBULL, -1), 3),
        ("mixed_exponential_ml", mk(Family.MIXED_EXPONENTIAL, -1), 2),
        ("mixed_exponential_ml",
         mk(Family.MIXED_EXPONENTIAL, -1, deg=Degeneracy.A), 4),
        ("mgw_mixture", mk(Family.MGW, -1, method=Method.MIXTURE), 2),
        ("mgw_mixture",
         mk(Family.MGE, -1, method=Method.MIXTURE, deg=Degeneracy.B1), 3),
        ("mgw_mixture",
         mk(Family.MEW, -1, method=Method.MIXTURE, deg=Degeneracy.B2), 3),
        ("mgw_mixture",
         mk(Family.MIXED_EXPONENTIAL, -1, method=Method.MIXTURE,
            deg=Degeneracy.B3), 4),
    ])
    def test_gaps(self, key, fit, expect):
        assert degrees_of_freedom(key, fit, base()) == expect

    def test_exponential_against_collapsed_base(self):
        fit = mk(Family.EXPONENTIAL, -1)
        assert degrees_of_freedom("exponential_ml", fit,
                                  base(deg=Degeneracy.C)) == 1

    def test_mgw_ml_has_no_df(self):
        with pytest.raises(ValueError):
            degrees_of_freedom("mgw_ml", base(), base())


class TestAic:
    def test_formula(self):
        fit = mk(Family.GAMMA, -250.0)
        assert aic(fit, "gamma_ml") == pytest.approx(2 * 2 + 500.0)

    def test_degenerate_mixture_counts_one(self):
        fit = mk(Family.MIXED_EXPONENTIAL, -250.0, method=Method.MIXTURE,
                 deg=Degeneracy.B3)
        assert aic(fit, "mgw_mixture") == pytest.approx(2 * 1 + 500.0)


class TestLrt:
    def test_tested_statistic_df_p(self):
        cand = mk(Family.GAMMA, -103.0)
        v = lrt("gamma_ml", cand, base(-100.0))
        assert v.status is LrtStatus.TESTED
        assert v.statistic == pytest.approx(6.0)
        assert v.df == 3
        assert v.p_value == pytest.approx(chi_square_sf(6.0, 3), abs=1e-12)

    def test_equal_log_lik_still_tested(self):
        cand = mk(Family.GAMMA, -100.0)
        v = lrt("gamma_ml", cand, base(-100.0))
        assert v.status is LrtStatus.TESTED
        assert v.statistic == pytest.approx(0.0)
        assert v.p_value == pytest.approx(1.0)

    def test_candidate_above_base(self):
        cand = mk(Family.MIXED_EXPONENTIAL, -99.5)
        v = lrt("mixed_exponential_ml", cand, base(-100.0))
        assert v.status is LrtStatus.CANDIDATE_EXCEEDS_MGW
        assert v.p_value is None

    def test_degenerate_base_blocks_all_but_exponential(self):
        b = base(-100.0, deg=Degeneracy.C)
        for key, fam in (("gamma_ml", Family.GAMMA),
                         ("weibull_ml", Family.WEIBULL),
                         ("mixed_exponential_ml", Family.MIXED_EXPONENTIAL)):
            assert lrt(key, mk(fam, -105.0), b).status is LrtStatus.MGW_DEGENERATE
        v = lrt("exponential_ml", mk(Family.EXPONENTIAL, -105.0), b)
        assert v.status is LrtStatus.TESTED
        assert v.df == 1

    def test_failure_statuses(self):
        v = lrt("mgw_mixture", FitFailure(reason="cv_stat_below_one"), base())
        assert v.status is LrtStatus.CV_LESS_THAN_ONE
        v = lrt("gamma_ml", FitFailure(reason="non_identifiable"), base())
        assert v.status is LrtStatus.UNAVAILABLE

    def test_boundary_mixture_blocked_even_when_higher(self):
        cand = mk(Family.MGW, -99.0, method=Method.MIXTURE, boundary=True)
        v = lrt("mgw_mixture", cand, base(-100.0))
        assert v.status is LrtStatus.MIXTURE_AT_BOUNDARY

    def test_run_lrts_order_and_skips(self):
        fits = full_fits()
        del fits["weibull_ml"]
        verdicts = run_lrts(fits, base())
        assert [v.candidate for v in verdicts] == [
            k for k in CANDIDATE_KEYS if k != "weibull_ml"]


class TestDisplayLabel:
    def test_plain_families(self):
        assert display_label(mk(Family.GAMMA, -1)) == "Gamma (ML estimation)"
        assert display_label(
            mk(Family.MGE, -1, method=Method.MIXTURE)) == "MGE (mixture estimation)"

    def test_collapsed_mixed_exponential_reads_exponential(self):
        fit = mk(Family.MIXED_EXPONENTIAL, -1, deg=Degeneracy.A)
        assert display_label(fit) == "Exponential (ML estimation)"

    def test_b3_mixture_reads_mixed_exponential(self):
        fit = mk(Family.MIXED_EXPONENTIAL, -1, method=Method.MIXTURE,
                 deg=Degeneracy.B3)
        assert display_label(fit) == "Mixed Exponential (mixture estimation)"


class TestSelectModel:
    def test_max_p_value_wins(self):
        # mixture gap 5.8 on df 2: p = exp(-2.9) ~ 0.055, the only one >= 0.05
        fits = full_fits(mgw_mixture=mk(Family.MGW, -102.9, method=Method.MIXTURE))
        report = select_model(fits, base(-100.0))
        assert report.chosen == "mgw_mixture"
        assert report.rule is SelectionRule.MAX_P_VALUE
        assert report.p_value == pytest.approx(chi_square_sf(5.8, 2), abs=1e-12)

    def test_just_under_threshold_goes_to_base(self):
        # mixture gap 6.0 on df 2: p = exp(-3) ~ 0.0498, everything below 0.05
        report = select_model(full_fits(), base(-100.0))
        assert report.chosen == "mgw_ml"
        assert report.rule is SelectionRule.ALL_BELOW_THRESHOLD

    def test_all_below_threshold_keeps_base(self):
        fits = full_fits(
            mgw_mixture=mk(Family.MGW, -140.0, method=Method.MIXTURE),
            mixed_exponential_ml=mk(Family.MIXED_EXPONENTIAL, -141.0),
            gamma_ml=mk(Family.GAMMA, -142.0),
            weibull_ml=mk(Family.WEIBULL, -143.0),
            exponential_ml=mk(Family.EXPONENTIAL, -144.0),
        )
        report = select_model(fits, base(-100.0))
        assert report.chosen == "mgw_ml"
        assert report.rule is SelectionRule.ALL_BELOW_THRESHOLD
        assert report.label == "MGW (ML estimation)"

    def test_exceeders_compete_on_aic_alone(self):
        # two candidates beat the base; the better AIC among them wins even
        # though a non-exceeder holds the best AIC overall
        fits = full_fits(
            mixed_exponential_ml=mk(Family.MIXED_EXPONENTIAL, -99.0),
            mgw_mixture=mk(Family.MGW, -99.4, method=Method.MIXTURE),
            gamma_ml=mk(Family.GAMMA, -99.9),
        )
        fits["gamma_ml"] = mk(Family.GAMMA, -100.4)  # best AIC, not exceeder
        report = select_model(fits, base(-100.0))
        assert report.rule is SelectionRule.AIC_AMONG_EXCEEDERS
        # aic: mixed_exp 2*3+198=204.0, mixture 2*3+198.8=204.8
        assert report.chosen == "mixed_exponential_ml"
        assert report.aic == pytest.approx(204.0)

    def test_exceeder_aic_tie_breaks_on_family_order(self):
        fits = full_fits(
            gamma_ml=mk(Family.GAMMA, -99.0),
            weibull_ml=mk(Family.WEIBULL, -99.0),
        )
        report = select_model(fits, base(-100.0))
        assert report.chosen == "gamma_ml"

    def test_degenerate_base_aic_pool(self):
        b = base(-100.0, deg=Degeneracy.C,
                 params=MgwParams(p=1e-6, alpha=1.0, beta=5.0, k=0.9, lam=5.0))
        fits = full_fits(
            weibull_ml=mk(Family.WEIBULL, -100.0),
            mixed_exponential_ml=mk(Family.MIXED_EXPONENTIAL, -100.5),
            mgw_mixture=mk(Family.MGW, -100.2, method=Method.MIXTURE),
        )
        report = select_model(fits, b)
        assert report.rule is SelectionRule.AIC_AFTER_DEGENERATE
        # weibull 2*2+200=204 vs mixed_exp 207 vs mixture 206.4
        assert report.chosen == "weibull_ml"

    def test_degenerate_target_follows_p(self):
        b = base(-100.0, deg=Degeneracy.C,
                 params=MgwParams(p=1.0 - 1e-6, alpha=1.3, beta=4.0, k=1.0, lam=4.0))
        fits = full_fits(gamma_ml=mk(Family.GAMMA, -100.0),
                         weibull_ml=mk(Family.WEIBULL, -100.0),
                         mixed_exponential_ml=FitFailure(reason="x"),
                         mgw_mixture=FitFailure(reason="cv_stat_below_one"))
        report = select_model(fits, b)
        assert report.chosen == "gamma_ml"

    def test_degenerate_target_without_params_uses_closest_log_lik(self):
        b = Fit(family=Family.MGW, method=Method.ML, params=None,
                log_lik=-100.001, n=300, degeneracy=Degeneracy.C)
        fits = full_fits(gamma_ml=mk(Family.GAMMA, -100.0),
                         weibull_ml=mk(Family.WEIBULL, -108.0),
                         mixed_exponential_ml=FitFailure(reason="x"),
                         mgw_mixture=FitFailure(reason="cv_stat_below_one"))
        report = select_model(fits, b)
        assert report.chosen == "gamma_ml"

    def test_degenerate_base_excludes_boundary_mixture(self):
        b = base(-100.0, deg=Degeneracy.C,
                 params=MgwParams(p=1e-6, alpha=1.0, beta=5.0, k=0.9, lam=5.0))
        fits = full_fits(
            weibull_ml=mk(Family.WEIBULL, -120.0),
            mixed_exponential_ml=mk(Family.MIXED_EXPONENTIAL, -118.0),
            mgw_mixture=mk(Family.MGW, -90.0, method=Method.MIXTURE,
                           boundary=True),
        )
        report = select_model(fits, b)
        # aic: weibull 244, mixed_exp 242; the boundary mixture (aic 186)
        # never enters the pool
        assert report.chosen == "mixed_exponential_ml"

    def test_p_value_tie_breaks_on_fewer_free_parameters(self):
        # same statistic and df give identical p-values
        fits = full_fits(
            mixed_exponential_ml=mk(Family.MIXED_EXPONENTIAL, -103.0,
                                    deg=Degeneracy.A),
            exponential_ml=mk(Family.EXPONENTIAL, -103.0),
            gamma_ml=mk(Family.GAMMA, -130.0),
            weibull_ml=mk(Family.WEIBULL, -130.0),
            mgw_mixture=mk(Family.MGW, -130.0, method=Method.MIXTURE),
        )
        b = base(-100.0)
        va = lrt("exponential_ml", fits["exponential_ml"], b)
        vb = lrt("mixed_exponential_ml", fits["mixed_exponential_ml"], b)
        assert va.p_value == vb.p_value  # both df=4, stat=6
        report = select_model(fits, b)
        assert report.chosen == "exponential_ml"  # 1 free parameter beats 1? equal
        # exponential and collapsed mixed-exp both have 1 free parameter;
        # the family order breaks the remaining tie
        assert report.rule is SelectionRule.MAX_P_VALUE

    def test_p_value_equal_free_tie_breaks_on_order(self):
        fits = full_fits(
            gamma_ml=mk(Family.GAMMA, -103.0),
            weibull_ml=mk(Family.WEIBULL, -103.0),
            exponential_ml=mk(Family.EXPONENTIAL, -130.0),
            mixed_exponential_ml=mk(Family.MIXED_EXPONENTIAL, -130.0),
            mgw_mixture=mk(Family.MGW, -130.0, method=Method.MIXTURE),
        )
        report = select_model(fits, base(-100.0))
        assert report.chosen == "gamma_ml"

    def test_threshold_is_inclusive(self):
        fits = full_fits(
            gamma_ml=mk(Family.GAMMA, -130.0),
            weibull_ml=mk(Family.WEIBULL, -130.0),
            exponential_ml=mk(Family.EXPONENTIAL, -130.0),
            mixed_exponential_ml=mk(Family.MIXED_EXPONENTIAL, -130.0),
            mgw_mixture=mk(Family.MGW, -130.0, method=Method.MIXTURE),
        )
        # at equal statistic the widest df gives the largest p-value, so the
        # exponential leads; a threshold equal to its p still admits it
        report = select_model(fits, base(-100.0), threshold=chi_square_sf(60.0, 4))
        assert report.chosen == "exponential_ml"
        assert report.rule is SelectionRule.MAX_P_VALUE
        assert report.p_value == pytest.approx(chi_square_sf(60.0, 4), abs=1e-15)

    def test_missing_candidates_tolerated(self):
        fits = {"gamma_ml": mk(Family.GAMMA, -101.0)}
        report = select_model(fits, base(-100.0))
        assert report.chosen == "gamma_ml"
