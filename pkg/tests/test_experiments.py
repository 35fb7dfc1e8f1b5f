import math

import numpy as np
import pytest
from scipy.signal import argrelmax

from kerrloss.experiments import (
    SweepError,
    SweepResult,
    baselines,
    fidelity_map,
    gain_vs_time,
    optimal_gain_surface,
    optimal_qfi,
    qutrit_average_gain,
    quadrature_ratio_map,
    small_time_gain,
    splitmix64,
    uniform_samples,
)
from kerrloss.metrology import optimal_gain_pure_approx, optimal_time_pure_approx
from kerrloss.states import ProbeSpec

QFI_COLUMNS = ("H_kerr", "H_lin", "H_coherent", "H_squeezed", "H_fock", "F_x", "H_ref")


def assert_consistent(result: SweepResult):
    for row in result.rows:
        for col in QFI_COLUMNS:
            if col in row:
                assert row[col] >= -1e-8
        if "gain" in row and "H_kerr" in row and row["H_lin"] > 0:
            assert abs(row["gain"] - (row["H_kerr"] / row["H_lin"] - 1)) <= 1e-12


# --- RNG and serialization ------------------------------------------------------

def test_splitmix_reference_values():
    # reference outputs of the SplitMix64 generator for seed 1234567
    gen = splitmix64(1234567)
    assert [next(gen) for _ in range(3)] == [6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_uniform_samples_open_interval_and_deterministic():
    a = uniform_samples(7, 1000, 0.0, math.pi / 2)
    assert np.all((a > 0) & (a < math.pi / 2))
    assert np.array_equal(a, uniform_samples(7, 1000, 0.0, math.pi / 2))
    assert not np.array_equal(a, uniform_samples(8, 1000, 0.0, math.pi / 2))
    assert abs(a.mean() - math.pi / 4) < 0.05


def test_csv_roundtrip(tmp_path):
    res = baselines([0.1, 1.0], nbar=1.0)
    sidecar = res.to_csv(tmp_path / "b.csv")
    back = SweepResult.read_csv(tmp_path / "b.csv")
    assert back.columns == res.columns
    for r1, r2 in zip(res.rows, back.rows):
        for c in res.columns:
            assert r1[c] == r2[c]
    assert sidecar.exists() and back.meta["experiment"] == "baselines"
    first = (tmp_path / "b.csv").read_text().splitlines()[1].split(",")
    assert first[0] == "0.10000000000000001"


def test_seeded_sweep_byte_identical(tmp_path):
    for name in ("a", "b"):
        qutrit_average_gain([0.5], [1.0], samples=20, seed=11).to_csv(tmp_path / f"{name}.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_parallel_order_matches_serial():
    serial = optimal_gain_surface([0.5, 1.0], [0.5, 2.0], workers=1)
    parallel = optimal_gain_surface([0.5, 1.0], [0.5, 2.0], workers=2)
    assert serial.rows == parallel.rows


def test_sweep_error_names_point():
    with pytest.raises(SweepError, match=r"\(40.0, 0.5"):
        optimal_gain_surface([40.0], [0.5])


# --- gain vs time -------------------------------------------------------------------

@pytest.mark.parametrize("probe", [ProbeSpec.coherent(1.0), ProbeSpec.squeezed(nbar=1.0)])
def test_gain_vs_time_linear_is_zero(probe):
    res = gain_vs_time(probe, 0.0, np.linspace(0.05, 6, 25))
    assert np.abs(res.column("gain")).max() <= 1e-6
    assert_consistent(res)


def test_gain_vs_time_structure():
    taus = np.linspace(0.01, 8, 400)
    coh = gain_vs_time(ProbeSpec.coherent(1.0), 0.5, taus)
    sq = gain_vs_time(ProbeSpec.squeezed(nbar=1.0), 0.5, taus)
    assert_consistent(coh)
    g = coh.column("gain")
    peaks = argrelmax(g)[0]
    assert taus[np.argmax(g)] < 1
    # a second, smaller peak beyond the first
    assert len(peaks) >= 2 and taus[peaks[1]] > taus[peaks[0]] and g[peaks[1]] < g[peaks[0]]
    gs = sq.column("gain")
    assert taus[np.argmax(gs)] < 1 and gs.max() > 3 * g.max()


# --- optimal time -------------------------------------------------------------------

def test_optimal_qfi_linear_coherent():
    tau, h = optimal_qfi(ProbeSpec.coherent(1.0), 0.0)
    assert abs(tau - 2) <= 1e-3
    assert h == pytest.approx(4 / math.e ** 2, rel=1e-5)


def test_optimal_qfi_fock_independent_of_lambda():
    a = optimal_qfi(ProbeSpec.fock(2), 0.0)
    b = optimal_qfi(ProbeSpec.fock(2), 2.0)
    assert a[0] == pytest.approx(b[0], abs=1e-6)


def test_optimal_time_shift_small_lambda():
    # tau* ~ 2 + 32 lam^2 |alpha|^4 within 10% of the shift
    tau, _ = optimal_qfi(ProbeSpec.coherent(1.0), 0.05)
    shift, predicted = tau - 2.0, optimal_time_pure_approx(1.0, 0.05) - 2.0
    print(f"tau* = {tau:.6f}; shift {shift:.6f} vs predicted {predicted:.6f}")
    assert abs(shift - predicted) <= 0.1 * predicted


# --- optimal gain surface -----------------------------------------------------------

def test_optimal_gain_surface_small_lambda_column():
    res = optimal_gain_surface([0.5, 1.0], [0.05])
    measured = res.column("gain")
    predicted = np.array([optimal_gain_pure_approx(a, 0.05) for a in (0.5, 1.0)])
    print(f"optimal gain {measured} vs {predicted}")
    assert np.all(np.abs(measured / predicted - 1) <= 0.1)


def test_optimal_gain_surface_vanishes_for_small_alpha():
    res = optimal_gain_surface([0.0, 0.05, 0.1], [1.0, 3.0])
    assert_consistent(res)
    g = res.column("gain").reshape(3, 2)
    assert np.all(g[0] == 0)
    assert np.all(g[1] < g[2]) and g.max() < 1e-3
    assert res.meta["min_gain"] >= -1e-6


# --- small-time gain ----------------------------------------------------------------

def test_small_time_gain_rejects_bad_tau():
    with pytest.raises(ValueError):
        small_time_gain([ProbeSpec.coherent(1.0)], 1.0, [0.5])


def test_small_time_gain_coherent_formula():
    # G ~ 4 lam^2 tau^2 |alpha|^4 at tau = 0.1, small lam
    res = small_time_gain([ProbeSpec.coherent(1.0)], 0.1, [0.005, 0.01])
    ratio = res.column("gain") / (4 * res.column("lambda") ** 2 * 0.01)
    print(f"small-time gain ratio {ratio}")
    assert np.all(np.abs(ratio - 1) <= 0.1)


def test_small_time_gain_squeezed_shrinks_with_tau():
    lams = [0.5, 1.0, 2.0, 3.0]
    gains = [small_time_gain([ProbeSpec.squeezed(nbar=1.0)], tau, lams).column("gain") for tau in (0.5, 0.1, 0.01)]
    assert np.all(gains[0] > gains[1]) and np.all(gains[1] > gains[2])


# --- quadrature ratio ---------------------------------------------------------------

def test_quadrature_ratio_modes():
    with pytest.raises(ValueError):
        quadrature_ratio_map("sometimes", [1.0], [0.0])
    with pytest.raises(ValueError):
        quadrature_ratio_map("fixed-time", [1.0], [0.0])


def test_quadrature_ratio_linear_is_one():
    res = quadrature_ratio_map("optimal-time", [0.5, 1.0], [0.0])
    assert np.abs(res.column("ratio") - 1).max() <= 1e-4
    assert_consistent(res)


def test_quadrature_ratio_fixed_time_baseline():
    res = quadrature_ratio_map("fixed-time", [1.0], [0.0, 1.0], tau=0.1)
    assert res.rows[0]["ratio"] == pytest.approx(1.0, abs=1e-4)
    assert res.rows[0]["H_ref"] == res.rows[1]["H_ref"]


# --- qutrit averages ------------------------------------------------------------------

def test_qutrit_gain_validation():
    with pytest.raises(ValueError):
        qutrit_average_gain([0.5], [1.0], samples=0)


def test_qutrit_gain_signs():
    res = qutrit_average_gain([0.5], [1e-4, 1.0, 2.0], samples=50, seed=3)
    g = res.column("mean_gain")
    assert abs(g[0]) < 1e-6
    assert g[1] > 0
    assert g[2] < 0
    assert np.all(res.column("min_gain") <= g) and np.all(g <= res.column("max_gain"))


# --- fidelity map -------------------------------------------------------------------------

def test_fidelity_map_examples():
    lams = [0.0, 0.1, 0.3, 0.6]
    res = fidelity_map((0.5, 0.75, 1.0), lams, [1.0, 20.0])
    f = res.column("fidelity").reshape(3, 4, 2)
    assert np.abs(f[:, 0, :] - 1).max() <= 1e-10
    assert np.all(np.diff(f[:, :, 0], axis=1) < 0)
    assert np.all(np.diff(f[:, 1:, 0], axis=0) < 0)
    assert np.abs(f[:, :, 1] - 1).max() <= 1e-3


# --- baselines --------------------------------------------------------------------------------

def test_baselines_fock_dominates():
    res = baselines(np.linspace(0.01, 8, 100), nbar=1.0)
    assert_consistent(res)
    assert np.all(res.column("H_fock") > np.maximum(res.column("H_coherent"), res.column("H_squeezed")))
