import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from jtfs.errors import InvalidSpecError
from jtfs.filterbank import (AnalyticFilter, FilterBank, FilterBankSpec, angular_grid,
                             build_filterbank, build_mother_wavelet, build_quefrency_bank,
                             covered_band, littlewood_paley, lowpass_hat, relative_sigma)

TWO_PI = 2 * np.pi


def closed_form(omega, sigma):
    """Unit-center corrected Gaussian, written out independently."""
    return (np.exp(-((omega - 1) ** 2) / (2 * sigma ** 2))
            - np.exp(-1 / (2 * sigma ** 2)) * np.exp(-(omega ** 2) / (2 * sigma ** 2)))


def oracle_edges(Q):
    """Half-power edges of the closed form, by root finding."""
    sigma = (2 ** (1 / (2 * Q)) - 1) / math.sqrt(math.log(2))
    w = np.linspace(1e-6, 4, 400001)
    peak_w = w[np.argmax(closed_form(w, sigma))]
    peak = closed_form(peak_w, sigma)
    f = lambda x: closed_form(x, sigma) ** 2 - peak ** 2 / 2
    return brentq(f, 1e-6, peak_w), brentq(f, peak_w, 4.0)


def measured_edges(filt, n_fft):
    omega = 8.0 * np.fft.fftfreq(n_fft)
    order = np.argsort(omega)
    w, p = omega[order], filt.response[order] ** 2
    half = p.max() / 2
    k = np.argmax(p)
    lo = np.interp(half, p[:k + 1], w[:k + 1])
    hi = np.interp(half, p[k:][::-1], w[k:][::-1])
    return lo, hi


def neg_energy_fraction(resp):
    f = np.fft.fftfreq(resp.size)
    e = np.abs(resp) ** 2
    return e[f < 0].sum() / e.sum()


@pytest.fixture(scope="module")
def bank():
    return build_filterbank(FilterBankSpec(16000.0, 8, 0.032, 32768))


class TestMotherWavelet:
    def test_q8_half_power_edges(self):
        n = 2 ** 18
        lo, hi = measured_edges(build_mother_wavelet(8, n), n)
        olo, ohi = oracle_edges(8)
        assert lo == pytest.approx(olo, abs=1e-4)
        assert hi == pytest.approx(ohi, abs=1e-4)
        # the correction term is negligible at Q = 8: edges at 1 +- (2^(1/16) - 1)
        hw = 2 ** (1 / 16) - 1
        np.testing.assert_allclose([lo, hi], [1 - hw, 1 + hw], atol=2e-4)

    def test_q1_bandwidth_ratio(self):
        n = 2 ** 18
        lo1, hi1 = measured_edges(build_mother_wavelet(1, n), n)
        lo8, hi8 = measured_edges(build_mother_wavelet(8, n), n)
        olo1, ohi1 = oracle_edges(1)
        olo8, ohi8 = oracle_edges(8)
        assert (hi1 - lo1) / (hi8 - lo8) == pytest.approx((ohi1 - olo1) / (ohi8 - olo8),
                                                          rel=1e-3)
        assert (hi1 - lo1) > 5 * (hi8 - lo8)

    @pytest.mark.parametrize("Q", [1, 2, 8, 16, 24])
    def test_analytic_and_zero_mean(self, Q):
        f = build_mother_wavelet(Q, 4096)
        assert neg_energy_fraction(f.response) <= 1e-6
        assert abs(f.response[0]) <= 1e-6 * np.abs(f.response).max()

    @pytest.mark.parametrize("Q", [0, -1, 1.5])
    def test_bad_q(self, Q):
        with pytest.raises(InvalidSpecError):
            build_mother_wavelet(Q)


class TestSpec:
    @pytest.mark.parametrize("kw", [dict(Q=0), dict(T=0.0), dict(n_fft=1000),
                                    dict(sample_rate=-1.0), dict(n_fft=256),
                                    dict(axis="space")])
    def test_invalid(self, kw):
        args = dict(sample_rate=16000.0, Q=8, T=0.032, n_fft=1024)
        args.update(kw)
        with pytest.raises(InvalidSpecError):
            FilterBankSpec(**args)

    def test_nyquist_below_first_center(self):
        with pytest.raises(InvalidSpecError, match="Nyquist"):
            build_filterbank(FilterBankSpec(1000.0, 8, 0.004, 64))

    def test_quefrency_spec_rejected(self):
        with pytest.raises(InvalidSpecError):
            build_filterbank(FilterBankSpec(8, 1, 4, 256, axis="quefrency"))


class TestTimeBank:
    def test_descending(self, bank):
        assert np.all(np.diff(bank.centers) < 0)

    def test_geometric_ratio_exact(self, bank):
        geo = [f.center for f in bank.filters if f.kind == "geometric"]
        steps = np.diff(np.log2(geo))
        np.testing.assert_allclose(steps, -1 / 8, rtol=0, atol=1e-12)

    def test_geometric_region_bottom(self, bank):
        geo = np.array([f.center for f in bank.filters if f.kind == "geometric"])
        edge = TWO_PI * 8 / 0.032
        assert edge / TWO_PI == pytest.approx(250.0)
        assert geo.min() >= edge * (1 - 1e-12)
        assert geo.min() < edge * 2 ** (1 / 8)

    def test_top_center_below_nyquist(self, bank):
        assert bank.centers[0] == pytest.approx(TWO_PI * 8000 * 2 ** (-1 / 16), rel=1e-12)

    def test_linear_low_band(self, bank):
        lin = np.array([f.center for f in bank.filters if f.kind == "linear_lowband"])
        step = TWO_PI / 0.032
        assert lin.size > 0
        assert lin.min() == pytest.approx(step)
        assert np.all(-np.diff(lin) <= step * (1 + 1e-9))
        assert all(f.bandwidth == pytest.approx(step)
                   for f in bank.filters if f.kind == "linear_lowband")

    def test_second_order_geometry(self):
        b2 = build_filterbank(FilterBankSpec(2000.0, 1, 0.032, 4096))
        geo = [f.center for f in b2.filters if f.kind == "geometric"]
        np.testing.assert_allclose(np.diff(np.log2(geo)), -1.0, atol=1e-12)

    def test_analytic_zero_mean(self, bank):
        for f in bank.filters:
            assert neg_energy_fraction(f.response) <= 1e-6
            assert abs(f.response[0]) <= 1e-6 * np.abs(f.response).max()

    def test_parseval(self, bank):
        for f in bank.filters[::7]:
            t_energy = np.sum(np.abs(f.time_domain()) ** 2)
            f_energy = np.sum(np.abs(f.response) ** 2) / f.response.size
            assert t_energy == pytest.approx(f_energy, rel=1e-10)

    def test_lowpass_half_power_support(self, bank):
        # |phi(t)|^2 falls to half at +- T/2
        phi = np.fft.fftshift(np.fft.ifft(bank.lowpass.response).real)
        t = (np.arange(phi.size) - phi.size // 2) / 16000.0
        p = phi ** 2 / (phi ** 2).max()
        width = 2 * np.interp(0.5, p[phi.size // 2:][::-1], t[phi.size // 2:][::-1])
        assert width == pytest.approx(0.032, rel=1e-3)

    def test_littlewood_paley(self, bank):
        lp = littlewood_paley(bank)
        lo, hi = covered_band(bank)
        w = angular_grid(bank.spec.n_fft, 16000.0)
        assert lp.max() <= 1 + 1e-3
        assert lp[(w >= lo) & (w <= hi)].min() >= 0.8
        assert lo == pytest.approx(TWO_PI / 0.032)
        assert hi <= 0.8 * bank.spec.nyquist

    def test_littlewood_paley_direct_sum(self, bank):
        # direct summation over +w and -w, independent of the vectorized form
        w = angular_grid(bank.spec.n_fft, 16000.0)
        k = np.searchsorted(np.sort(w), [TWO_PI * 300, TWO_PI * 3000])
        for omega in np.sort(w)[k]:
            i = np.flatnonzero(np.isclose(w, omega))[0]
            j = np.flatnonzero(np.isclose(w, -omega))[0]
            s = bank.lowpass.response[i] ** 2
            for f in bank.filters:
                s += 0.5 * (abs(f.response[i]) ** 2 + abs(f.response[j]) ** 2)
            assert littlewood_paley(bank)[i] == pytest.approx(s, rel=1e-12)

    def test_littlewood_paley_empty_and_scaled(self, bank):
        empty = FilterBank(bank.spec, (), bank.lowpass)
        np.testing.assert_array_equal(littlewood_paley(empty), bank.lowpass.response ** 2)
        double = FilterBank(
            bank.spec,
            tuple(AnalyticFilter(f.center, f.bandwidth, 2 * f.response, f.kind)
                  for f in bank.filters),
            AnalyticFilter(0.0, bank.lowpass.bandwidth, 2 * bank.lowpass.response, "lowpass"))
        np.testing.assert_allclose(littlewood_paley(double), 4 * littlewood_paley(bank),
                                   rtol=1e-12)

    def test_response_at_grid_points(self, bank):
        w = angular_grid(bank.spec.n_fft, 16000.0)[:200:13]
        got = bank.response_at(w)
        np.testing.assert_allclose(got, bank.responses()[:200:13], atol=1e-12)
        np.testing.assert_allclose(bank.response_at(w, 3), bank.responses()[:200:13, 3],
                                   atol=1e-12)


class TestQuefrencyBank:
    def test_centers_q8_k4(self):
        qb = build_quefrency_bank(8, 4, 70)
        np.testing.assert_allclose(qb.centers, [2, 1, 0.5, 0.25, 0.125])
        assert qb.spec.axis == "quefrency"

    def test_lowpass_support(self):
        qb = build_quefrency_bank(8, 1, 70)
        w = angular_grid(qb.spec.n_fft, 8)
        np.testing.assert_allclose(qb.lowpass.response, lowpass_hat(w, 1.0))
        assert qb.centers.min() == pytest.approx(0.5)

    def test_too_large_k(self):
        with pytest.raises(InvalidSpecError, match="exceeds"):
            build_quefrency_bank(8, 10, 70)
        with pytest.raises(InvalidSpecError):
            build_quefrency_bank(8, 0.5, 70)

    def test_time_support_within_axis(self):
        # 8-octave axis at 8 bins per octave: every filter's half-power
        # support fits inside the 64 bins
        qb = build_quefrency_bank(8, 4, 64)
        for f in qb.filters:
            env = np.abs(np.fft.fftshift(f.time_domain())) ** 2
            assert np.count_nonzero(env >= env.max() / 2) <= 64

    def test_frame_bound(self):
        qb = build_quefrency_bank(8, 4, 70)
        lp = littlewood_paley(qb)
        lo, hi = covered_band(qb)
        w = angular_grid(qb.spec.n_fft, 8)
        m = (np.abs(w) >= lo) & (np.abs(w) <= hi)
        assert lp.max() <= 1 + 1e-3
        assert lp[m].min() >= 0.8

    def test_analytic_zero_mean(self):
        for f in build_quefrency_bank(8, 4, 70).filters:
            assert neg_energy_fraction(f.response) <= 1e-6
            assert abs(f.response[0]) <= 1e-6 * np.abs(f.response).max()


@settings(max_examples=25, deadline=None)
@given(Q=st.integers(1, 16), T_ms=st.sampled_from([16, 32, 64, 128]),
       rate=st.sampled_from([8000.0, 16000.0, 22050.0]))
def test_bank_invariants(Q, T_ms, rate):
    T = T_ms / 1000
    n_fft = 1 << int(math.ceil(math.log2(4 * T * rate)))
    try:
        bank = build_filterbank(FilterBankSpec(rate, Q, T, n_fft))
    except InvalidSpecError:
        assert rate / 2 * 2 ** (-1 / (2 * Q)) < Q / T
        return
    geo = np.array([f.center for f in bank.filters if f.kind == "geometric"])
    np.testing.assert_allclose(np.diff(np.log2(geo)), -1 / Q, atol=1e-12)
    assert littlewood_paley(bank).max() <= 1 + 1e-3
    for f in bank.filters:
        assert neg_energy_fraction(f.response) <= 1e-6
        assert abs(f.response[0]) <= 1e-6 * np.abs(f.response).max()


def test_relative_sigma_half_power():
    # a Gaussian of this width drops to half power at 2^(1/2Q) - 1
    for Q in (1, 4, 8):
        s = relative_sigma(Q)
        hw = 2 ** (1 / (2 * Q)) - 1
        assert np.exp(-(hw ** 2) / s ** 2) == pytest.approx(0.5)
