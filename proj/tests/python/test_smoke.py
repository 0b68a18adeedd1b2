import json
import random

import pytest

import glimpse


def greedy(backend, prompt, n):
    config = glimpse.DecodeConfig()
    config.window_len = 0
    config.max_new_tokens = n
    return glimpse.ar_baseline(prompt, backend, config).exact_rationale


def test_counting_savings_and_losslessness():
    backend = glimpse.make_backend({"kind": "counting", "modulus": 10})
    result = glimpse.run_rationale([0], backend, {"window_len": 7, "max_new_tokens": 200})
    assert result.exact_rationale == [(i + 1) % 10 for i in range(200)]
    assert result.commits[:3] == [1, 8, 1]
    assert result.iterations <= 200 // 8 + 3
    assert result.stop_reason == "max_tokens"


@pytest.mark.parametrize("kind", ["toy", "counting"])
def test_random_windows_match_greedy(kind):
    backend = glimpse.make_backend({"kind": kind})
    rng = random.Random(5)
    hi = 250 if kind == "toy" else 10
    lo = 5 if kind == "toy" else 0
    for _ in range(10):
        prompt = [rng.randrange(lo, hi) for _ in range(rng.randint(1, 6))]
        config = {"window_len": rng.randint(0, 9), "skip": rng.random() < 0.5,
                  "max_new_tokens": 24}
        got = glimpse.run_rationale(prompt, backend, config).exact_rationale
        assert got == greedy(backend, prompt, 24)


def test_verify_examples():
    assert glimpse.verify([5, 7, 9], [5, 7, 8, 4]) == ([5, 7, 8], 2, [4, 0, 0])
    assert glimpse.verify([5, 7, 9], [5, 7, 8, 4], skip=False) == ([5], 2, [7, 8, 4])
    with pytest.raises(glimpse.ContractViolation):
        glimpse.verify([5, 7, 9], [5, 7, 9])


def test_metrics_and_trace():
    backend = glimpse.make_backend({"kind": "toy", "seed": 3})
    prompt = glimpse.encode_bytes("two plus two")
    config = {"window_len": 4, "max_new_tokens": 30}
    fc = glimpse.run_rationale(prompt, backend, config)
    ar = glimpse.ar_baseline(prompt, backend, config)
    report = glimpse.hit_report(fc, ar)
    assert report["total_hit"] <= min(report["occur_pd_ad"], report["occur_ad_pd"])
    savings = glimpse.iteration_savings(fc, ar)
    assert savings["ar_tokens"] == savings["fastcot_tokens"] == 30
    lines = [json.loads(line) for line in fc.trace_jsonl().splitlines()]
    assert len(lines) == fc.iterations
    assert sum(len(line["committed"]) for line in lines) == 30


def test_corrupt_and_errors():
    kept = glimpse.corrupt(list(range(11, 21)), 0.5, 5, 0)
    assert len(kept) == 10 and kept.count(0) == 5
    assert kept == glimpse.corrupt(list(range(11, 21)), 0.5, 5, 0)
    with pytest.raises(glimpse.ConfigError):
        glimpse.make_backend({"kind": "unknown"})
    with pytest.raises(ValueError):
        glimpse.DecodeConfig({"window_len": 2, "colour": "red"})
    assert glimpse.config_digest({}) == "08f44b07b5901a25"
