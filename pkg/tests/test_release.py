import numpy as np
import pytest

from dpnego.config import load_config
from dpnego.contracts import ContractRequest, FeatureKind, PurposeKind, ResolutionKind, validate_request
from dpnego.ingest import LoadSeries
from dpnego.negotiation import NonPositiveEpsilon
from dpnego.release import (
    ArityExceeded,
    DataGap,
    DpConfig,
    Mechanism,
    NonPositiveSensitivity,
    NonWhitelistedOp,
    QueryPlan,
    RuntimeBudgetExceeded,
    SanitizedOutput,
    ScopeViolation,
    TokenNotConsumed,
    UnnoisedOutput,
    compliance_check,
    dp_noise,
    execute_plan,
    gaussian_sigma,
    laplace_scale,
    run_release,
    sample_laplace,
    true_report_probability,
    validate_plan,
)
from dpnego.secretshare import ReleaseAuthority

CFG = load_config()
CATALOG = CFG.catalog


def contract(features=(FeatureKind.LOAD_CURVE,), window=24, resolution=ResolutionKind.HOUR1):
    return validate_request(
        ContractRequest(
            requester_id="r",
            owner_id="o",
            features=tuple(features),
            window_hours=window,
            resolution=resolution,
            purpose=PurposeKind.FORECASTING,
        ),
        CATALOG,
    )


def series(values, spacing=3600):
    values = np.asarray(values, dtype=np.float64)
    return LoadSeries(
        source_id="test",
        timestamps=np.arange(len(values), dtype=np.int64) * spacing,
        values=values,
        resolution={3600: ResolutionKind.HOUR1, 300: ResolutionKind.MIN5}[spacing],
    )


def mean_plan(**overrides):
    doc = {
        "ops": [
            {"op": "select", "features": ["load_curve"]},
            {"op": "window", "hours": 24},
            {"op": "aggregate", "fn": "mean"},
        ],
        "delta": 1.0,
        "output_arity": 1,
        "mechanism": "laplace",
    }
    doc.update(overrides)
    return QueryPlan.from_dict(doc)


def consumed_token(contract_id="c-1"):
    authority = ReleaseAuthority()
    shares = authority.enroll(contract_id, secret=99, k=3, n=5, seed=3)
    return authority.authorize_release(contract_id, list(shares[:3])).consume()


# --- validate_plan -----------------------------------------------------------

def test_in_scope_mean_plan_ok():
    validate_plan(mean_plan(), contract())


def test_scope_violation_on_uncontracted_feature():
    plan = mean_plan(ops=[
        {"op": "select", "features": ["location"]},
        {"op": "aggregate", "fn": "mean"},
    ])
    with pytest.raises(ScopeViolation):
        validate_plan(plan, contract())


def test_runtime_budget_enforced():
    ops = [{"op": "clip", "lo": 0, "hi": 1}] * 32 + [{"op": "aggregate", "fn": "mean"}]
    plan = mean_plan(ops=ops)
    with pytest.raises(RuntimeBudgetExceeded):
        validate_plan(plan, contract())


def test_non_whitelisted_op():
    plan = mean_plan(ops=[{"op": "exfiltrate"}, {"op": "aggregate", "fn": "mean"}])
    with pytest.raises(NonWhitelistedOp):
        validate_plan(plan, contract())


def test_window_beyond_contract_scope():
    plan = mean_plan(ops=[
        {"op": "window", "hours": 48},
        {"op": "aggregate", "fn": "mean"},
    ])
    with pytest.raises(ScopeViolation):
        validate_plan(plan, contract(window=24))


def test_resample_finer_than_contract_rejected():
    plan = mean_plan(ops=[
        {"op": "resample", "resolution": "min5"},
        {"op": "aggregate", "fn": "mean"},
    ])
    with pytest.raises(ScopeViolation):
        validate_plan(plan, contract(resolution=ResolutionKind.HOUR1))


def test_arity_over_cap():
    ops = [{"op": "aggregate", "fn": "mean"}] * 10
    plan = mean_plan(ops=ops, output_arity=10)
    with pytest.raises(ArityExceeded):
        validate_plan(plan, contract(), DpConfig(), output_cap=4)


def test_plan_json_round_trip():
    plan = mean_plan()
    assert QueryPlan.from_json(plan.to_json()) == plan


# --- execute_plan --------------------------------------------------------------

def test_sum_of_constant_series():
    plan = mean_plan(ops=[{"op": "aggregate", "fn": "sum"}])
    got = execute_plan(plan, series([3.0] * 10))
    assert got == (30.0,)


def test_clip_applies_before_aggregation():
    plan = mean_plan(ops=[
        {"op": "clip", "lo": 0.0, "hi": 1.0},
        {"op": "aggregate", "fn": "mean"},
    ])
    got = execute_plan(plan, series([2.0, 0.5, -1.0, 0.5]))
    assert got == (0.5,)


def test_window_beyond_data_is_a_gap():
    plan = mean_plan()
    with pytest.raises(DataGap):
        execute_plan(plan, series([1.0] * 10))  # 24h window, 10 samples


def test_resample_then_max():
    plan = mean_plan(ops=[
        {"op": "window", "hours": 2},
        {"op": "resample", "resolution": "hour1"},
        {"op": "aggregate", "fn": "max"},
    ])
    data = series([1.0] * 24, spacing=300)  # 2h at 5-minute spacing
    got = execute_plan(plan, data)
    assert got == (1.0,)


def test_count_aggregate():
    plan = mean_plan(ops=[{"op": "aggregate", "fn": "count"}])
    assert execute_plan(plan, series([1.0] * 7)) == (7.0,)


# --- noise mechanisms ---------------------------------------------------------

def test_laplace_scale_formula():
    assert laplace_scale(1.0, 1.0) == 1.0
    assert laplace_scale(2.0, 4.0) == 0.5


def test_doubling_epsilon_halves_scale():
    assert laplace_scale(1.0, 2.0) == laplace_scale(1.0, 1.0) / 2


def test_gaussian_sigma_formula():
    import math

    expected = 1.0 * math.sqrt(2 * math.log(1.25 / 1e-5)) / 1.0
    assert gaussian_sigma(1.0, 1.0, 1e-5) == pytest.approx(expected)


def test_seeded_laplace_golden_draw():
    rng = np.random.default_rng(12345)
    got = sample_laplace(rng, 1.0, 1)[0]
    assert got == pytest.approx(-0.7881789002823312, abs=1e-15)


def test_laplace_empirical_mad():
    rng = np.random.default_rng(777)
    samples = sample_laplace(rng, 1.0, 1_000_000)
    assert abs(np.abs(samples).mean() - 1.0) < 0.02


def test_randomized_rounding_limit():
    assert true_report_probability(50.0, 4) == pytest.approx(1.0, abs=1e-12)
    p = true_report_probability(1.0, 4)
    assert p == pytest.approx(0.4753668864186717, abs=1e-12)


def test_dp_noise_requires_consumed_token():
    authority = ReleaseAuthority()
    shares = authority.enroll("c-x", secret=1, k=2, n=3, seed=1)
    token = authority.authorize_release("c-x", list(shares[:2]))
    with pytest.raises(TokenNotConsumed):
        dp_noise([1.0], 1.0, 1.0, Mechanism.LAPLACE, seed=1, token=token)


def test_dp_noise_epsilon_and_sensitivity_guards():
    token = consumed_token()
    with pytest.raises(NonPositiveEpsilon):
        dp_noise([1.0], 0.0, 1.0, Mechanism.LAPLACE, seed=1, token=token)
    with pytest.raises(NonPositiveSensitivity):
        dp_noise([1.0], 1.0, 0.0, Mechanism.LAPLACE, seed=1, token=token)


def test_dp_noise_reproducible():
    token = consumed_token()
    a = dp_noise([1.0, 2.0], 1.0, 1.0, Mechanism.LAPLACE, seed=42, token=token)
    b = dp_noise([1.0, 2.0], 1.0, 1.0, Mechanism.LAPLACE, seed=42, token=token)
    assert a == b


def test_randomized_rounding_keeps_category_space():
    token = consumed_token()
    out = dp_noise([2], 1.0, 1.0, Mechanism.RANDOMIZED_ROUNDING, seed=5, token=token, categories=4)
    assert out.values[0] in (0, 1, 2, 3)


# --- compliance -----------------------------------------------------------------

def test_compliance_ok():
    token = consumed_token()
    out = dp_noise([1.0], 1.0, 1.0, Mechanism.LAPLACE, seed=1, token=token)
    compliance_check(out, output_cap=4)


def test_compliance_rejects_unnoised():
    fake = SanitizedOutput(values=(1.0,), mechanism=Mechanism.LAPLACE, epsilon_charged=1.0, noise_trace="")
    with pytest.raises(UnnoisedOutput):
        compliance_check(fake, output_cap=4)


def test_compliance_rejects_over_arity():
    token = consumed_token()
    out = dp_noise(list(range(10)), 1.0, 1.0, Mechanism.LAPLACE, seed=1, token=token)
    with pytest.raises(ArityExceeded):
        compliance_check(out, output_cap=4)


# --- end to end ------------------------------------------------------------------

def test_sequential_composition_bounded_by_initial_budget():
    # negotiate -> settle -> authorize -> release, repeatedly against one
    # owner: the sum of charged epsilons never exceeds the initial budget
    from dpnego.negotiation import BudgetLedger, negotiate, settle
    from dpnego.contracts import Decision

    ledger = BudgetLedger(h_max=8.0)
    authority = ReleaseAuthority()
    req = validate_request(
        ContractRequest(
            requester_id="r",
            owner_id="o",
            features=(FeatureKind.AGGREGATE,),
            window_hours=48,
            resolution=ResolutionKind.HOUR1,
            purpose=PurposeKind.BILLING,
            proposed_epsilon=0.9,
        ),
        CATALOG,
    )
    data = series([1.0] * 72)
    plan = mean_plan(ops=[
        {"op": "select", "features": ["aggregate"]},
        {"op": "window", "hours": 24},
        {"op": "aggregate", "fn": "mean"},
    ])
    charged = 0.0
    releases = 0
    for i in range(40):
        outcome = negotiate(req, ledger, 0.5, CFG.engine)
        if outcome.decision is not Decision.APPROVE:
            break
        cid = f"seq-{i}"
        settle(ledger, cid, outcome.epsilon_star)
        shares = authority.enroll(cid, secret=1000 + i, k=3, n=5, seed=i)
        token = authority.authorize_release(cid, list(shares[:3]))
        out = run_release(
            plan, data, req, eps_star=outcome.epsilon_star, token=token, seed=i
        )
        assert out.epsilon_charged == outcome.epsilon_star
        charged += out.epsilon_charged
        releases += 1
        assert ledger.h_remaining >= 0.0
    assert releases > 1
    assert charged <= 8.0 + 1e-9
    assert charged == pytest.approx(ledger.spent)


def test_run_release_end_to_end():
    authority = ReleaseAuthority()
    shares = authority.enroll("c-9", secret=31337, k=3, n=5, seed=9)
    token = authority.authorize_release("c-9", list(shares[:3]))
    out = run_release(
        mean_plan(),
        series([1.0] * 48),
        contract(),
        eps_star=1.2,
        token=token,
        seed=77,
    )
    assert out.epsilon_charged == 1.2
    assert out.mechanism is Mechanism.LAPLACE
    assert len(out.values) == 1
    assert out.noise_trace
    # same plan, data, seed: bit-identical output
    authority2 = ReleaseAuthority()
    shares2 = authority2.enroll("c-9", secret=31337, k=3, n=5, seed=9)
    token2 = authority2.authorize_release("c-9", list(shares2[:3]))
    again = run_release(
        mean_plan(), series([1.0] * 48), contract(), eps_star=1.2, token=token2, seed=77
    )
    assert again == out
