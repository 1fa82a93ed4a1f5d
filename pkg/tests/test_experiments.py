"""Experiment plumbing: CSV writing, model rebuilds, sweep table layout."""

import math
import warnings

import numpy as np
import pytest

from modeheat import LargeStepWarning, SimConfig, coupling_g
from modeheat.experiments import (
    _with_coupling,
    _with_equal_baths,
    experiment_strong_coupling_sweep,
    write_csv,
)

from conftest import oscillator_pair, single_oscillator


def test_write_csv_round_trip(tmp_path):
    path = tmp_path / "table.csv"
    rows = [[1.0, math.pi, 6.5e-21], [2.0, -1.2345678901234567e-9, 0.0]]
    write_csv(path, ["a", "b", "c"], rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b,c"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    # %.17g keeps float64 values exact through the text round trip
    assert np.array_equal(data, np.array(rows))


def test_with_coupling_replaces_existing_spring():
    model = oscillator_pair(g_over_gamma=10.0)
    target_g = 500.0
    rebuilt = _with_coupling(model, ("A", "B"), target_g)
    assert len(rebuilt.couplings) == 1
    assert coupling_g(rebuilt, ("A", "B")).value == pytest.approx(target_g, rel=1e-12)
    mA, mB = (o.mass for o in rebuilt.oscillators)
    wA, wB = (o.omega for o in rebuilt.oscillators)
    expected_k = 2.0 * math.sqrt(mA * mB) * math.sqrt(wA * wB) * target_g
    assert rebuilt.couplings[0].spring_constant == pytest.approx(expected_k, rel=1e-12)


def test_with_coupling_adds_spring_to_uncoupled_pair():
    model = oscillator_pair(g_over_gamma=10.0)
    import dataclasses

    bare = dataclasses.replace(model, couplings=())
    rebuilt = _with_coupling(bare, ("A", "B"), 123.0)
    assert len(rebuilt.couplings) == 1
    assert coupling_g(rebuilt, ("A", "B")).value == pytest.approx(123.0, rel=1e-12)


def test_with_equal_baths():
    model = oscillator_pair(t_a=400.0, t_b=200.0)
    equal = _with_equal_baths(model, 321.0)
    assert all(o.bath_temperature == 321.0 for o in equal.oscillators)
    # everything else untouched
    assert equal.couplings == model.couplings
    assert [o.label for o in equal.oscillators] == ["A", "B"]


def test_sweep_table_layout():
    model = oscillator_pair(t_a=400.0, t_b=200.0)
    sim = SimConfig(
        dt=0.0200125, n_steps=200, seed=3, ensemble_size=8, allow_large_step=True
    )
    gamma = model.oscillators[0].gamma
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LargeStepWarning)
        header, rows, checks = experiment_strong_coupling_sweep(
            model, [10.0 * gamma], sim, psd_duration_s=4.0, psd_ensemble=2, threads=4
        )
    for column in (
        "g_over_gamma",
        "T_prime_A_lyap",
        "T_prime_A_mc",
        "T_prime_A_psd",
        "P_A_gap",
        "P_A_direct",
        "P_A_lyap",
        "balance_residual",
    ):
        assert column in header
    assert len(rows) == 1
    assert len(rows[0]) == len(header)
    assert rows[0][header.index("g_over_gamma")] == 10.0
    assert rows[0][header.index("balance_residual")] < 1e-8
    # short-record smoke run: exact-route columns still correct
    t_lyap = rows[0][header.index("T_prime_A_lyap")]
    assert 200.0 < t_lyap < 400.0


def test_sweep_requires_a_pair():
    model = single_oscillator()
    sim = SimConfig(dt=0.0200125, n_steps=100, seed=3, allow_large_step=True)
    with pytest.raises(ValueError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LargeStepWarning)
            experiment_strong_coupling_sweep(model, [1.0], sim)
