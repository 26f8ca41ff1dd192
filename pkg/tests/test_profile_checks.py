import pytest

from analysis.profile_checks import (
    DISCREPANCY,
    PASS,
    WORST_NODES,
    resolve_selector,
    verify_profile,
    verify_profiles,
)
from core.errors import ConfigError
from pde.profiles import PROFILE_NAMES


def test_selector_resolution():
    assert resolve_selector("ALL") == list(PROFILE_NAMES)
    assert resolve_selector(" power ") == ["power"]
    with pytest.raises(ConfigError) as info:
        resolve_selector("catenoid")
    assert info.value.key == "selector"


@pytest.mark.parametrize("name", ["henon", "henon-calibrated"])
def test_exact_henon_profiles_pass(name):
    verdict = verify_profile(name)
    assert verdict.verdict == PASS, verdict.sup_residuals
    assert verdict.order is None or verdict.order >= 1.0
    assert verdict.discrepancies == []
    assert verdict.notes["gradient_order"] > 1.5


def test_printed_constant_with_absorption_is_reported():
    verdict = verify_profile("henon-absorption")
    assert verdict.verdict == DISCREPANCY
    assert 0 < len(verdict.discrepancies) <= WORST_NODES
    worst = verdict.discrepancies[0]
    assert abs(worst.residual) == pytest.approx(verdict.sup_residuals[-1])
    assert worst.h == verdict.spacings[-1]


def test_barrier_nondeg_sign():
    verdict = verify_profile("barrier-nondeg")
    assert verdict.verdict == PASS
    low, high = verdict.notes["residual_range"][-1]
    assert high < 0.0
    assert verdict.rule == "residual < 0 on region"


def test_barrier_hopf_sign():
    verdict = verify_profile("barrier-hopf")
    assert verdict.verdict == PASS
    low, _ = verdict.notes["residual_range"][-1]
    assert low > 0.0


def test_power_profile_mismatch_is_reported_not_raised():
    verdict = verify_profile("power")
    assert verdict.verdict == DISCREPANCY
    assert 0 < len(verdict.discrepancies) <= WORST_NODES
    notes = verdict.notes
    assert notes["diffusion_at_half"] == pytest.approx(notes["quoted_normalization_at_half"])


def test_profile_parameters_override_defaults():
    verdict = verify_profile("barrier-hopf", params={"r": 0.6}, spacings=(1.0 / 32.0, 1.0 / 64.0))
    assert verdict.notes["params"]["r"] == 0.6
    assert verdict.spacings == [1.0 / 32.0, 1.0 / 64.0]


def test_selector_runs_single_profile():
    verdicts = verify_profiles("nonuniqueness", spacings=(1.0 / 32.0, 1.0 / 64.0))
    assert [v.profile for v in verdicts] == ["nonuniqueness"]
    assert verdicts[0].verdict in (PASS, DISCREPANCY)
    assert len(verdicts[0].sup_residuals) == 2
