"""Smoke test for the blpv_py extension module.

Imports an installed ``blpv_py`` if there is one (e.g. after ``maturin
develop`` in crates/python); otherwise loads the library built by
``cargo build --release -p blpv-python``.
"""

import importlib.machinery
import importlib.util
import json
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load_module():
    try:
        import blpv_py

        return blpv_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libblpv_py.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("blpv_py", str(lib))
            spec = importlib.util.spec_from_file_location("blpv_py", lib, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("blpv_py not found: run `cargo build --release -p blpv-python` first")


def main():
    blpv = load_module()

    assert blpv.bfr([1.0, 2.0, 4.0], [1.0, 2.0, 4.0]) == 100.0
    assert abs(blpv.snr_db([1.0, -1.0], [0.1, -0.1]) - 20.0) < 1e-12

    data = blpv.benchmark_dataset(n_samples=200, seed=3)
    assert len(data) == 200 and len(data.p) == 200

    config = json.dumps(
        {"identify": {"degree_candidates": [2], "max_iters": 20, "restarts": 1}}
    )
    result = blpv.identify(data, config_json=config, seed=3)
    assert result.chosen_degree == 2
    assert len(result.H) == 3 and len(result.H[0]) == 5
    assert len(result.path) == 100
    trace = result.loglik_trace
    assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))

    score = blpv.evaluate(result, data, benchmark_truth=True)
    for key in ("bfr_output", "bfr_output_noise_free", "bfr_scheduling"):
        assert 0.0 <= score[key] <= 100.0, (key, score[key])

    a = [[0.9, 0.1], [0.2, 0.8]]
    log_b = [[math.log(0.7), math.log(0.3)], [math.log(0.1), math.log(0.9)]]
    states, log_score = blpv.viterbi(a, [0.5, 0.5], log_b)
    assert states == [1, 1]
    assert abs(log_score - math.log(0.5 * 0.3 * 0.8 * 0.9)) < 1e-12
    assert blpv.log_likelihood(a, [0.5, 0.5], log_b) >= log_score

    try:
        blpv.Dataset([1.0, 2.0], [1.0])
    except ValueError as err:
        assert "dimension" in str(err) or "invalid" in str(err), err
    else:
        raise AssertionError("length mismatch accepted")

    print("smoke test passed:", json.dumps(score, sort_keys=True))


if __name__ == "__main__":
    main()
