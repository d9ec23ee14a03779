#!/usr/bin/env python3
"""Smoke test for the fftn_otfs Python extension module.

Builds the binding crate with cargo, stages the shared library as an
importable module in a temporary directory, and exercises the main types
and operations end to end: the delay-Doppler transforms (against an
independent NumPy reference), effective-channel construction, the full
transmit/detect chain, the mode table, the link-budget scalars, the
scenario sweep (including run-to-run determinism), and the numerical
self-check suite.

Usage: python3 python/smoke_test.py
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

REPO_ROOT = Path(__file__).resolve().parent.parent


def build_and_import():
    subprocess.run(
        ["cargo", "build", "-p", "fftn-otfs-py"],
        cwd=REPO_ROOT,
        check=True,
    )
    lib = REPO_ROOT / "target" / "debug" / "libfftn_otfs_py.so"
    if not lib.exists():
        raise SystemExit(f"missing build artifact: {lib}")
    stage = Path(tempfile.mkdtemp(prefix="fftn-otfs-py-"))
    shutil.copy2(lib, stage / "fftn_otfs.so")
    sys.path.insert(0, str(stage))
    import fftn_otfs

    return fftn_otfs


def check(name, ok, detail=""):
    tag = "ok" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"  {tag}: {name}{suffix}")
    if not ok:
        raise SystemExit(f"smoke test failed at: {name}{suffix}")


def reference_isfft(grid):
    """Independent NumPy reference for the delay-Doppler -> time-frequency map.

    Inverse DFT over the delay axis (length M) and forward DFT over the
    Doppler axis (length N), jointly normalized to be unitary.
    """
    m, n = grid.shape
    tf = np.fft.fft(np.fft.ifft(grid, axis=0), axis=1) * m / math.sqrt(m * n)
    return tf


def main():
    fo = build_and_import()
    print(f"imported {fo.version()}")

    # Frame configuration and derived quantities.
    f = fo.Frame(8, 8, alpha=0.9)
    check(
        "frame geometry",
        f.mn == 64
        and f.n_bits == 128
        and abs(f.delay_resolution_s - 1.0 / (8 * 15e3)) < 1e-18
        and abs(f.doppler_resolution_hz - 15e3 / (8 * 0.9)) < 1e-9,
        repr(f),
    )

    # Transforms against the independent NumPy reference, plus round trip.
    rng = np.random.default_rng(1)
    grid = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    tf = np.asarray(fo.isfft(grid))
    ref = reference_isfft(grid)
    dev_ref = np.max(np.abs(tf - ref))
    back = np.asarray(fo.sfft(tf))
    dev_rt = np.max(np.abs(back - grid))
    dev_energy = abs(np.sum(np.abs(tf) ** 2) - np.sum(np.abs(grid) ** 2))
    check(
        "transform vs NumPy reference, round trip, Parseval",
        dev_ref < 1e-10 and dev_rt < 1e-10 and dev_energy < 1e-9,
        f"ref {dev_ref:.2e}, round trip {dev_rt:.2e}, energy {dev_energy:.2e}",
    )

    # Orthogonal single-tap reference channel is the identity.
    f1 = fo.Frame(8, 8, alpha=1.0)
    h_los = np.asarray(fo.pure_los_effective_channel(f1))
    dev_eye = np.max(np.abs(h_los - np.eye(64)))
    check("orthogonal line-of-sight channel is identity", dev_eye < 1e-9, f"{dev_eye:.2e}")

    # Full chain, noiseless: bits must survive the compressed channel.
    bits = rng.integers(0, 2, size=f.n_bits).astype(np.uint8)
    x = np.asarray(fo.map_bits(f, bits)).flatten(order="F")
    h = np.asarray(fo.effective_channel(f, "tdl-d", seed=3))
    y = fo.transmit(f, h, x, 0.0, seed=5)
    x_hat, mse, sinr = fo.detect(f, h, np.asarray(y), 1e-6)
    grid_hat = np.asarray(x_hat).reshape((f.m, f.n), order="F")
    bits_hat = np.asarray(fo.demap_grid(f, grid_hat), dtype=np.uint8)
    errors = int(np.sum(bits != bits_hat))
    sinr_dev = np.max(np.abs(np.asarray(sinr) - (1.0 / np.asarray(mse) - 1.0)))
    check(
        "noiseless chain recovers bits; SINR consistent with MSE",
        errors == 0 and sinr_dev == 0.0,
        f"{errors} bit errors, sinr dev {sinr_dev:.1e}",
    )

    # Semi-analytic error probability is a proper probability and matches
    # the Gaussian tail at the identity channel.
    pb = fo.theoretical_ber(f, h, 10 ** (-15 / 10))
    gamma = 10 ** (8 / 10)
    pb_id = fo.theoretical_ber(
        fo.Frame(8, 8, alpha=1.0, modulation="bpsk"), h_los, 1.0 / gamma
    )
    pb_ref = fo.q_function(math.sqrt(2 * gamma))
    check(
        "semi-analytic error probability",
        0.0 < pb < 0.5 and abs(pb_id - pb_ref) < 1e-12,
        f"fading {pb:.3e}; identity {pb_id:.6e} vs Q {pb_ref:.6e}",
    )

    # Mode-table presets.
    default_ok = (
        fo.select_alpha(13.9) == 1.0
        and fo.select_alpha(14.0) == 0.9
        and fo.select_alpha(25.9) == 0.9
        and fo.select_alpha(26.0) == 0.8
    )
    footnote_ok = (
        fo.select_alpha(-0.1, "footnote-modes") == 1.0
        and fo.select_alpha(0.0, "footnote-modes") == 0.95
        and fo.select_alpha(15.0, "footnote-modes") == 0.95
        and fo.select_alpha(15.1, "footnote-modes") == 0.9
    )
    check("mode-table thresholds", default_ok and footnote_ok)

    # Link-budget scalars.
    check(
        "link-budget scalars",
        fo.slant_distance_m(90.0) == 780e3
        and abs(fo.fspl_db(780e3, 28.0) - 179.2351) < 1e-3
        and abs(fo.gas_attenuation_db(30.0) - 0.44) < 1e-12,
    )

    # Scenario sweep: schema and run-to-run determinism.
    cfg = json.loads(fo.default_scenario_json())
    cfg["frame"]["m"] = 8
    cfg["frame"]["n"] = 8
    cfg["snr"] = {"start": 0.0, "stop": 10.0, "step": 5.0}
    cfg["trials"] = 20
    cfg["theory_draws"] = 2
    cfg["seed"] = 7
    csv_a = fo.ber_sweep_csv(json.dumps(cfg))
    csv_b = fo.ber_sweep_csv(json.dumps(cfg))
    body = [line for line in csv_a.splitlines() if not line.startswith("#")]
    header_ok = body[0] == (
        "snr_db,alpha,ber_sim,ber_sim_ci95,ber_theory,fer_sim,"
        "t_eff_bps,se_bps_hz,ee_bit_per_J,trials,errors_counted"
    )
    check(
        "scenario sweep schema and determinism",
        header_ok and len(body) == 4 and csv_a == csv_b,
        f"{len(body) - 1} rows",
    )

    # Link-budget table goes through the same CSV path.
    lb = fo.linkbudget_csv(theta="30:90:30")
    lb_rows = [line for line in lb.splitlines() if not line.startswith("#")]
    check("link-budget table", len(lb_rows) == 4 and lb_rows[0].startswith("theta_deg,"))

    # Numerical self-check suite.
    passed, report = fo.validate_chain()
    check("self-check suite", passed, report.splitlines()[-1] if report else "")

    print("smoke test passed")


if __name__ == "__main__":
    main()
