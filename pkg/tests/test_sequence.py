import math
import os
from dataclasses import replace

import numpy as np
import pytest

from squeezesim.sequence import (
    LabeledOutcome,
    MicrowavePulse,
    Prealign,
    ProbeStep,
    Protocol,
    ProtocolError,
    RecordSet,
    SimParams,
    TrialRecord,
    parse_protocol,
    run_trial,
    run_trials,
    spin_noise_reduction,
)
from squeezesim.experiments import SQUEEZING_PROTOCOL_TEXT, standard_protocol

PARAMS = SimParams()


class TestParser:
    def test_squeezing_sequence(self):
        p = parse_protocol("pump down\npulse 90 0\nprobe Nd\npulse 180 0\n"
                           "probe Np\nprobe Nf")
        assert len(p.steps) == 6
        assert p.probe_labels == ("Nd", "Np", "Nf")
        assert p.steps[1] == MicrowavePulse(math.pi / 2, 0.0)

    def test_empty_text_is_noop_protocol(self):
        p = parse_protocol("")
        assert p.steps == ()
        rec = run_trial(p, PARAMS, seed=1)
        assert rec.outcomes == {}

    def test_duplicate_label(self):
        with pytest.raises(ProtocolError, match="duplicate"):
            parse_protocol("probe X\nprobe X")

    def test_unknown_keyword_names_line(self):
        with pytest.raises(ProtocolError, match="line 2"):
            parse_protocol("pump down\nflip 90")

    def test_malformed_number_names_line(self):
        with pytest.raises(ProtocolError, match="line 1"):
            parse_protocol("pulse ninety 0")

    def test_comments_and_blanks_skipped(self):
        p = parse_protocol("# a comment\n\nprealign\nwait 0.001\n")
        assert len(p.steps) == 2
        assert isinstance(p.steps[0], Prealign)

    def test_mt_override(self):
        p = parse_protocol("probe A mt=123.5")
        assert p.steps[0] == ProbeStep("A", 123.5)

    def test_manual_duplicate_rejected(self):
        with pytest.raises(ProtocolError):
            Protocol((ProbeStep("A"), ProbeStep("A")))


class TestRunTrial:
    def test_structural_labels(self):
        rec = run_trial(standard_protocol(), PARAMS, seed=17)
        assert set(rec.outcomes) == {"Nd", "Np", "Nf"}
        assert len(rec.true_jz_trace) == 3
        assert rec.seed == 17

    def test_same_seed_bit_identical(self):
        a = run_trial(standard_protocol(), PARAMS, seed=99)
        b = run_trial(standard_protocol(), PARAMS, seed=99)
        assert a == b

    def test_zero_mt_probe_is_configuration_error(self):
        proto = parse_protocol("probe A")
        with pytest.raises(ProtocolError):
            run_trial(proto, PARAMS.with_mt(0.0), seed=1)

    def test_nominal_noise_reduction_band(self):
        # 200 trials at the reference operating point: nominal 1-sigma band
        rs = run_trials(standard_protocol(), PARAMS, 200,
                        master_seed=20260810)
        r = spin_noise_reduction(rs, "Nf", "Np")
        assert 1.0 / 18.0 <= r <= 1.0 / 14.0

    def test_prealign_offset_recorded(self):
        rec = run_trial(standard_protocol(), PARAMS, seed=23)
        assert rec.omega_p_offset_hz != 0.0
        no_prealign = parse_protocol("pump down\npulse 90 0\nprobe A")
        rec2 = run_trial(no_prealign, PARAMS, seed=23)
        assert rec2.omega_p_offset_hz == 0.0


class TestRunTrials:
    def test_trial_count(self):
        rs = run_trials(standard_protocol(), PARAMS, 100, master_seed=7)
        assert len(rs.trials) == 100

    def test_single_trial_matches_run_trial(self):
        rs = run_trials(standard_protocol(), PARAMS, 1, master_seed=7)
        from squeezesim.sequence import trial_seed
        direct = run_trial(standard_protocol(), PARAMS,
                           trial_seed(7, 0))
        assert rs.trials[0] == direct

    def test_parallel_equals_serial(self):
        serial = run_trials(standard_protocol(), PARAMS, 40, master_seed=7,
                            workers=1)
        threaded = run_trials(standard_protocol(), PARAMS, 40, master_seed=7,
                              workers=4)
        assert serial == threaded

    def test_env_var_caps_workers(self):
        os.environ["SQUEEZE_SIM_THREADS"] = "1"
        try:
            capped = run_trials(standard_protocol(), PARAMS, 20,
                                master_seed=9, workers=8)
        finally:
            del os.environ["SQUEEZE_SIM_THREADS"]
        plain = run_trials(standard_protocol(), PARAMS, 20, master_seed=9)
        assert capped == plain

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            run_trials(standard_protocol(), PARAMS, 0, master_seed=1)


def synthetic_records(n_trials: int, sigma: float, n_atoms: float,
                      seed: int) -> RecordSet:
    rng = np.random.default_rng(seed)
    trials = []
    for i in range(n_trials):
        diff = float(rng.normal(0.0, sigma))
        trials.append(TrialRecord(
            outcomes={"Np": LabeledOutcome(n_up=0.0, freq_hz=0.0),
                      "Nf": LabeledOutcome(n_up=diff, freq_hz=0.0)},
            true_jz_trace=(), seed=i))
    params = SimParams().snapshot()
    params["ensemble.n_effective"] = n_atoms
    return RecordSet(trials=tuple(trials), params=params, master_seed=seed)


class TestSpinNoiseReduction:
    def test_css_baseline_unity(self):
        # differences drawn with variance N/4 give R = 1 up to sampling
        n = 4.8e5
        rng = np.random.default_rng(2)
        trials = []
        for i in range(4000):
            d = float(rng.normal(0.0, math.sqrt(n / 4.0)))
            trials.append(TrialRecord(
                outcomes={"Np": LabeledOutcome(0.0, 0.0),
                          "Nf": LabeledOutcome(d, 0.0)},
                true_jz_trace=(), seed=i))
        params = SimParams().snapshot()
        rs = RecordSet(tuple(trials), params, 2)
        r = spin_noise_reduction(rs, "Nf", "Np")
        assert r == pytest.approx(1.0, abs=3.0 * math.sqrt(2.0 / 3999))

    def test_estimator_consistency_chi2(self):
        # known variance ratio recovered within 3 sigma of the chi^2 law
        n = 4.8e5
        sigma = math.sqrt(0.1 * n / 4.0)
        rs = synthetic_records(2000, sigma, n, seed=3)
        r = spin_noise_reduction(rs, "Nf", "Np")
        tol = 3.0 * math.sqrt(2.0 / 1999)
        assert abs(r / 0.1 - 1.0) <= tol

    def test_squeezed_records_far_below_unity(self):
        rs = run_trials(standard_protocol(), PARAMS, 300, master_seed=11)
        assert spin_noise_reduction(rs, "Nf", "Np") < 0.25

    def test_missing_label_error(self):
        rs = run_trials(standard_protocol(), PARAMS, 2, master_seed=1)
        with pytest.raises(KeyError):
            spin_noise_reduction(rs, "Nf", "Nx")

    def test_needs_two_trials(self):
        rs = run_trials(standard_protocol(), PARAMS, 1, master_seed=1)
        with pytest.raises(ValueError):
            spin_noise_reduction(rs, "Nf", "Np")


class TestSpinEcho:
    def test_pi_pulse_cancels_static_light_shift(self):
        # with the inhomogeneous light shift enabled, the echo protocol
        # preserves fringe amplitude; dropping the pi pulse reveals the cost
        params = replace(PARAMS, light_shift_per_photon=2e-5)

        n = PARAMS.ensemble.n_effective

        def fringe_amplitude(with_echo: bool) -> float:
            lines = ["pump down", "pulse 90 0", "probe A"]
            if with_echo:
                lines.append("pulse 180 0")
            lines += ["probe B", "pulse 90 0", "probe C"]
            proto = parse_protocol("\n".join(lines))
            rs = run_trials(proto, params, 60, master_seed=31)
            # the final pulse lands on a pole: |mean - N/2| = C_eff * N/2
            return abs(float(np.mean(rs.column("C"))) - n / 2.0)

        with_echo = fringe_amplitude(True)
        without = fringe_amplitude(False)
        assert with_echo > without + 0.01 * n / 2.0

    def test_light_shift_off_by_default(self):
        assert PARAMS.light_shift_per_photon == 0.0


class TestDeterminism:
    def test_recordset_pure_function_of_inputs(self):
        a = run_trials(standard_protocol(), PARAMS, 25, master_seed=123)
        b = run_trials(standard_protocol(), PARAMS, 25, master_seed=123)
        assert a == b

    def test_different_seeds_differ(self):
        a = run_trials(standard_protocol(), PARAMS, 5, master_seed=1)
        b = run_trials(standard_protocol(), PARAMS, 5, master_seed=2)
        assert a != b

    def test_protocol_text_constant_matches(self):
        assert parse_protocol(SQUEEZING_PROTOCOL_TEXT) == standard_protocol()
