import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hunter_saxton import (
    ContinuationPolicy,
    InitialProfile,
    Solution,
    compare,
    dissipative_characterization_check,
    event_grid,
    recover_dissipative,
    window_energy_check,
)
from hunter_saxton.energy_ledger import window_margins

from oracles import slope_squared_quadrature
from test_profile import profiles


def cusp_policies(cusp, ks=(0.0, 0.5, 1.0)):
    return {f"k={k}": ContinuationPolicy.uniform(cusp, k) for k in ks}


class TestEventGrid:
    def test_cusp(self, cusp):
        assert event_grid(cusp) == [0.0, 0.5, 1.0, 2.0]

    def test_truncated(self, two_cell):
        assert event_grid(two_cell, t_end=1.5) == [0.0, 1.0, 1.5]

    def test_no_events(self, flat):
        assert event_grid(flat) == [0.0, 1.0]


class TestCompare:
    def test_cusp_family(self, cusp):
        rep = compare(cusp, cusp_policies(cusp), [0.0, 0.5, 1.5, 3.0])
        assert rep.bound == [4.0, 4.0, 0.0, 0.0]
        assert rep.series["k=0.0"] == rep.bound
        assert rep.series["k=0.5"][2:] == [2.0, 2.0]
        assert rep.series["k=1.0"][2:] == [4.0, 4.0]
        assert rep.ok
        assert rep.verdicts["k=1.0"]["first_exceed_t"] == 1.5
        assert rep.verdicts["k=1.0"]["exceeds_after_first_event"]

    def test_cusp_against_quadrature(self, cusp):
        rep = compare(cusp, cusp_policies(cusp), [1.5])
        for name, pol in cusp_policies(cusp).items():
            fr = pol.solution(cusp).frame(1.5)
            q = slope_squared_quadrature(fr.positions, fr.slopes, -1.0, 3.0)
            assert abs(q - rep.series[name][0]) < 1e-9

    def test_no_events_all_coincide(self):
        p = InitialProfile((0.0, 1.0, 3.0), (1.0, 2.0))
        pols = {"d": ContinuationPolicy.dissipative(), "u": ContinuationPolicy.uniform(p, 1.0)}
        rep = compare(p, pols, [0, 1, 5])
        assert rep.series["d"] == rep.series["u"] == [9.0, 9.0, 9.0]

    def test_two_cell(self, two_cell):
        pols = {"d": ContinuationPolicy.dissipative(), "r": ContinuationPolicy(((1, 1.0),))}
        rep = compare(two_cell, pols, event_grid(two_cell))
        assert rep.bound == [2.0, 2.0, 1.0, 1.0]
        # at t = T the fan has zero width and the parent is already gone
        assert rep.t == [0.0, 1.0, 2.0, 3.0]
        assert np.allclose(rep.series["r"], [2.0, 2.0, 1.0, 2.0], rtol=1e-14)
        assert rep.ok

    def test_undetectable_gain_not_required(self):
        # kappa * e below the tolerance cannot show up in the energy
        p = InitialProfile((0.0, 1e-13, 1.0), (-1.0, 1.0))
        pols = {"d": ContinuationPolicy.dissipative(), "k": ContinuationPolicy.uniform(p, 1.0)}
        rep = compare(p, pols, event_grid(p))
        assert rep.ok and "first_event_t" not in rep.verdicts["k"]

    def test_requires_dissipative(self, cusp):
        with pytest.raises(ValueError):
            compare(cusp, {"k": ContinuationPolicy.uniform(cusp, 1.0)}, [0.0])

    def test_permutation_invariant(self, cusp):
        pols = list(cusp_policies(cusp).values())
        a = compare(cusp, pols, event_grid(cusp)).to_dict()
        b = compare(cusp, pols[::-1], event_grid(cusp)).to_dict()
        assert a == b

    def test_json_and_csv(self, cusp):
        rep = compare(cusp, cusp_policies(cusp), event_grid(cusp))
        buf = io.StringIO()
        rep.write_json(buf)
        data = json.loads(buf.getvalue())
        assert set(data) == {"t", "bound", "series", "verdicts"}
        buf = io.StringIO()
        rep.write_csv(buf)
        assert buf.getvalue().splitlines()[0] == "t,bound,k=0.0,k=0.5,k=1.0"

    @given(profiles(max_cells=6), st.floats(0.01, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_ordering_properties(self, p, k):
        pols = {"d": ContinuationPolicy.dissipative(), "k": ContinuationPolicy.uniform(p, k)}
        rep = compare(p, pols, event_grid(p))
        assert rep.ok, rep.verdicts

    def test_energy_continuous_at_zero(self, corpus):
        for p in corpus[:5]:
            for k in (0.0, 1.0):
                sol = ContinuationPolicy.uniform(p, k).solution(p)
                assert math.isclose(sol.energy(1e-12), p.total_energy, rel_tol=1e-12)


class TestWindowEnergy:
    def test_dissipative_zero(self, two_cell):
        m = window_margins(Solution(two_cell), -0.7, 0.6, np.linspace(0, 5, 51))
        assert np.max(np.abs(m)) <= 1e-12

    def test_cusp_full_window(self, cusp):
        sol = ContinuationPolicy(((0, 1.0),)).solution(cusp)
        assert window_margins(sol, -1.0, 2.0, [2.0])[0] == 4.0

    def test_empty_window(self, cusp):
        sol = ContinuationPolicy(((0, 1.0),)).solution(cusp)
        assert window_energy_check(sol, 0.5, 0.5, [0.5, 2.0]) == 0.0

    def test_rejects_reversed(self, cusp):
        with pytest.raises(ValueError):
            window_energy_check(Solution(cusp), 1.0, 0.0, [0.0])

    @given(profiles(max_cells=6), st.floats(0, 1), st.floats(0, 1), st.sampled_from([0.0, 0.5, 1.0]))
    @settings(max_examples=40, deadline=None)
    def test_nonnegative(self, p, s1, s2, k):
        lo, hi = p.support
        xi, zeta = sorted((lo - 0.5 + s1 * (hi - lo + 1), lo - 0.5 + s2 * (hi - lo + 1)))
        sol = ContinuationPolicy.uniform(p, k).solution(p)
        m = window_margins(sol, xi, zeta, event_grid(p))
        assert m.min() >= -1e-10
        if k == 0.0:
            assert np.max(np.abs(m)) <= 1e-10


class TestCharacterization:
    def test_two_cell(self, two_cell):
        assert dissipative_characterization_check(Solution(two_cell), 0.0, 1.0) <= 1e-12

    def test_left_of_support(self, two_cell):
        assert dissipative_characterization_check(Solution(two_cell), -3.0, 2.0) == 0.0

    def test_cusp(self, cusp):
        assert dissipative_characterization_check(Solution(cusp), 1.0, 0.5) <= 1e-12
        assert Solution(cusp).characteristic(1.0, 0.5).u == -1.0

    def test_rejects_continuation(self, cusp):
        with pytest.raises(ValueError):
            dissipative_characterization_check(ContinuationPolicy(((0, 1.0),)).solution(cusp), 1.0, 2.0)

    @given(profiles(), st.floats(-1, 1), st.floats(0, 10))
    @settings(max_examples=80, deadline=None)
    def test_holds_everywhere(self, p, s, t):
        lo, hi = p.support
        xi = lo + (s + 1) / 2 * (hi - lo) * 1.2 - 0.1 * (hi - lo)
        scale = 1 + abs(p.anchor) + p.total_energy * (1 + t)
        assert dissipative_characterization_check(Solution(p), xi, t) <= 1e-12 * scale


class TestRecovery:
    @given(profiles(max_cells=6), st.floats(0.0, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_recovers_iff_dissipative(self, p, k):
        pol = ContinuationPolicy.uniform(p, k)
        triggered = any(kk > 0 for _, kk in pol.resurrect)
        gained = max((k * m.energy for m in Solution(p).meta if math.isfinite(m.blowup_time)), default=0.0)
        if triggered and gained <= 1e-9:
            return  # below the energy tolerance, indistinguishable by design
        assert recover_dissipative(p, pol) == (not triggered)
