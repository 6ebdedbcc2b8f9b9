from random import Random

import pytest

from dcp.he import quantized_to_bytes
from dcp.scenario import builtin_scenario, scenario_from_dict
from dcp.simulator import (
    batch_to_csv,
    bench_comparison,
    build_world,
    plaintext_oracle,
    run_batch,
    run_scenario,
    run_scenario_detailed,
)


def small_scenario(seed=7, n=3, speaker=1, **overrides):
    d = {
        "seed": seed,
        "group_profile": "test",
        "dimension": 32,
        "quant_scale": 127,
        "passengers": [{"name": f"p{i}"} for i in range(n)],
        "capture_events": [{"present": list(range(n))}],
        "command": {
            "transcript": "Hey DashCam, pay for order number 120.",
            "speaker": speaker,
        },
    }
    d.update(overrides)
    return scenario_from_dict(d)


class TestRunScenario:
    def test_well_separated_unique_payer(self):
        report = run_scenario(small_scenario(n=4, speaker=3))
        assert report.decision["outcome"] == "unique_payer"
        assert report.decision["payer"] == 3
        assert report.oracle_agrees
        assert report.receipt is not None
        assert report.receipt["use_case"] == "fast_food"
        assert report.receipt["slot"] == 120

    def test_speaker_without_device(self):
        s = small_scenario(
            n=2,
            speaker=1,
            passengers=[
                {"name": "p0"},
                {"name": "p1", "has_device": False, "enrolled": False},
            ],
        )
        report = run_scenario(s)
        assert report.decision["outcome"] == "no_match"
        assert report.recourse_reason == "no_match"
        assert report.oracle_agrees

    def test_twin_voices_force_multiple_matches(self):
        s = small_scenario(n=2, speaker=0, shared_voice=[[0, 1]])
        report = run_scenario(s)
        assert report.decision["outcome"] == "multiple_matches"
        assert report.recourse_reason == "multiple_matches"
        assert report.oracle_agrees

    def test_unparseable_command_recourse(self):
        s = small_scenario(command={"transcript": "pay the piper", "speaker": 0})
        report = run_scenario(s)
        assert report.decision is None
        assert report.recourse_reason == "command_error"
        assert "error" in report.command
        assert report.oracle_agrees

    def test_determinism_byte_identical(self):
        s = builtin_scenario("drive_through", seed=21)
        a = run_scenario(s).to_json()
        b = run_scenario(s).to_json()
        assert a == b

    def test_different_seeds_differ(self):
        a = run_scenario(small_scenario(seed=1)).to_json()
        b = run_scenario(small_scenario(seed=2)).to_json()
        assert a != b

    def test_phase_times_and_accounting(self):
        report = run_scenario(small_scenario())
        assert set(report.phase_times) == {"connect", "enroll", "prescreen", "voice", "payment"}
        assert all(v >= 0 for v in report.phase_times.values())
        assert report.total_bytes == sum(report.bytes_by_type.values())
        assert report.total_sim_time > 0
        assert report.expansion_factor > 1
        assert report.message_counts["ConnectRequest"] == 3
        assert report.message_counts["EnrollmentTransfer"] == 3
        assert report.message_counts["PaymentRequest"] == 1

    def test_wall_clock_excluded_from_stable_json(self):
        report = run_scenario(small_scenario())
        assert "wall_clock_s" not in report.to_dict()
        assert "wall_clock_s" in report.to_dict(include_wall_clock=True)
        assert report.wall_clock_s > 0

    def test_unenrolled_device_not_challenged(self):
        s = small_scenario(
            n=3,
            speaker=0,
            passengers=[
                {"name": "p0"},
                {"name": "p1", "has_device": True, "enrolled": False},
                {"name": "p2"},
            ],
        )
        report, world, net = run_scenario_detailed(s)
        assert report.oracle_agrees
        assert report.decision["payer"] == 0
        # the un-enrolled device appears in the roster but never gets challenges
        entry = [e for e in world.dashcam.roster.values() if e.link == 1][0]
        assert not entry.enrolled


class TestOracleEquivalence:
    def test_randomized_scenarios_agree(self):
        rng = Random(0xACE)
        for trial in range(30):
            n = rng.randrange(1, 6)
            passengers = []
            for i in range(n):
                has_device = rng.random() < 0.8
                passengers.append(
                    {
                        "name": f"p{i}",
                        "has_device": has_device,
                        "enrolled": has_device and rng.random() < 0.9,
                        "noise_sigma": rng.choice([0.05, 0.3, 0.8, 1.3]),
                    }
                )
            events = []
            for _ in range(rng.randrange(0, 3)):
                present = [i for i in range(n) if rng.random() < 0.7]
                events.append({"present": present})
            s = small_scenario(
                seed=rng.getrandbits(32),
                n=n,
                speaker=rng.randrange(n),
                passengers=passengers,
                capture_events=events,
            )
            report = run_scenario(s)
            assert report.oracle_agrees, (trial, report.decision, report.oracle)

    def test_oracle_is_crypto_free(self):
        world = build_world(small_scenario())
        result = plaintext_oracle(world)
        assert result["outcome"] == "unique_payer"
        assert result["payer"] == 1


class TestPrivacyScan:
    def test_dashcam_never_sees_plaintext_templates(self):
        for name in ("drive_through", "twins", "toll_booth"):
            s = builtin_scenario(name, seed=13)
            _, world, net = run_scenario_detailed(s)
            exposure = bytes(net.dashcam_rx) + world.dashcam.state_dump()
            for dev in world.devices.values():
                if dev.face_template is not None:
                    assert quantized_to_bytes(dev.face_template) not in exposure
                    assert quantized_to_bytes(dev.voice_template) not in exposure
                secret = dev.keypair.x.to_bytes(world.params.scalar_bytes, "big")
                assert secret not in exposure


class TestBatch:
    def test_separable_rates_perfect(self):
        rows = run_batch(small_scenario(), trials=25)
        row = rows[0]
        assert row["tpir"] == 1.0
        assert row["fpir"] == 0.0
        assert row["face_tpir"] == 1.0
        assert row["face_fpir"] == 0.0
        assert row["voice_tpir"] == 1.0
        assert row["voice_fpir"] == 0.0
        assert row["oracle_agreement"] == 1.0
        assert row["unique"] + row["no_match"] + row["multiple"] == 25

    def test_noisy_rates_degrade_but_agree(self):
        rows = run_batch(small_scenario(), trials=30, sweep_key="noise_sigma",
                         sweep_values=[0.05, 1.6])
        clean, noisy = rows
        assert clean["tpir"] == 1.0
        assert noisy["tpir"] < 1.0
        assert clean["oracle_agreement"] == noisy["oracle_agreement"] == 1.0

    def test_single_trial(self):
        rows = run_batch(small_scenario(), trials=1)
        assert len(rows) == 1
        assert rows[0]["trials"] == 1

    def test_csv_shape(self):
        rows = run_batch(small_scenario(), trials=2)
        csv_text = batch_to_csv(rows)
        lines = csv_text.strip().splitlines()
        assert lines[0].startswith("sweep_key,sweep_value,trials,face_tpir")
        assert len(lines) == 2

    def test_bad_sweep_key(self):
        from dcp.errors import DcpError

        with pytest.raises(DcpError):
            run_batch(small_scenario(), trials=1, sweep_key="nope", sweep_values=[1])

    def test_metrics_in_unit_interval(self):
        rows = run_batch(small_scenario(), trials=5, sweep_key="voice_threshold",
                         sweep_values=[0.2, 0.9])
        for row in rows:
            for key in ("face_tpir", "face_fpir", "voice_tpir", "voice_fpir", "tpir", "fpir"):
                assert 0.0 <= row[key] <= 1.0


class TestBench:
    def test_bench_test_profile(self):
        result = bench_comparison("test", dim=32, scale=127)
        assert result["score_exact"]
        assert result["verify_result"] in ("match", "non-match")
        assert result["keygen_plus_comparison_s"] > 0
        assert set(result["timings"]) == {
            "keygen_s",
            "enroll_encrypt_s",
            "dlog_table_build_s",
            "encrypted_score_s",
            "decrypt_s",
            "prove_s",
            "verify_s",
        }


class TestLiveness:
    def test_no_outstanding_challenges_after_any_fixture(self):
        from dcp.scenario import BUILTIN_SCENARIOS, builtin_scenario

        for name in sorted(BUILTIN_SCENARIOS):
            _, world, _ = run_scenario_detailed(builtin_scenario(name, seed=9))
            assert not world.dashcam.pending, name

    def test_wall_clock_phases_reported(self):
        report = run_scenario(small_scenario())
        d = report.to_dict(include_wall_clock=True)
        assert {"build", "connect_enroll", "prescreen", "voice", "payment"} <= set(
            d["wall_clock_phases"]
        )
        assert "wall_clock_phases" not in report.to_dict()


class TestFusionPaths:
    def test_refresh_prescreen_on_pay_reruns_last_capture(self):
        s = small_scenario(refresh_prescreen_on_pay=True)
        report, world, _ = run_scenario_detailed(s)
        starts = [a for a in report.audit if a["event"] == "prescreen-start"]
        assert len(starts) == 2  # one capture event + the pay-time refresh
        assert report.oracle_agrees
        assert report.decision["outcome"] == "unique_payer"

    def test_candidate_set_follows_latest_capture(self):
        # capture 1 sees passenger 0 only, capture 2 sees passenger 1 only:
        # the voice round must run over capture 2's survivors
        s = small_scenario(
            n=2,
            speaker=0,
            capture_events=[{"present": [0]}, {"present": [1]}],
        )
        report = run_scenario(s)
        # speaker 0 is no longer a candidate, so no match is expected
        assert report.decision["outcome"] == "no_match"
        assert report.oracle_agrees

    def test_per_modality_thresholds(self):
        # faces pass at 0.5 but the voice bar of 0.999 rejects a sigma-0.3 probe
        s = small_scenario(
            thresholds={"face_cosine": 0.5, "voice_cosine": 0.999},
            passengers=[{"name": f"p{i}", "noise_sigma": 0.3} for i in range(3)],
        )
        report = run_scenario(s)
        assert report.decision["outcome"] == "no_match"
        assert report.oracle_agrees


class TestSecureProfileRide:
    def test_full_ride_on_secure_params_over_ble(self):
        s = small_scenario(
            n=2,
            speaker=1,
            group_profile="secure",
            dimension=128,
            transport="ble",
        )
        report = run_scenario(s)
        assert report.decision["outcome"] == "unique_payer"
        assert report.decision["payer"] == 1
        assert report.oracle_agrees
        # enrollment transfers run in parallel per device: ~10s each over BLE
        assert 8.0 <= report.phase_times["enroll"] + report.phase_times["connect"] <= 13.0
        assert report.expansion_factor > 400
