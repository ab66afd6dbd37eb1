"""
Convergence Study Test Suite

Tests the rate tables and the studies that fill them:
1. Pairwise rates and CSV layout
2. One-level solves and input validation
3. Elliptic projection study on the steady square
4. Reproduction of the published rates (slow)
5. Temporal order of backward Euler (slow)
"""

from pathlib import Path

import pytest

from src.config.run_config import parse_run_config
from src.exceptions import InvalidParameterError
from src.services.convergence import (
    CSV_COLUMNS,
    ConvergenceRow,
    ConvergenceTable,
    convergence_study,
    elliptic_study,
    rate,
    solve_level,
    temporal_study,
)
from src.services.mms import get_case

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'configs'


# ============================================================================
# FIXTURES
# ============================================================================

@pytest.fixture
def two_level_table():
    """Hand-made table, rows given finest first"""
    rows = [
        ConvergenceRow(level=1, h=0.125, err_sigma=2.0, err_dsigma=1.0, err_u=0.25),
        ConvergenceRow(level=0, h=0.25, err_sigma=4.0, err_dsigma=2.0, err_u=1.0),
    ]
    return ConvergenceTable(case='annulus2d', r=1, dt=1e-4, t_final=0.01, rows=rows).with_rates()


def run_spatial(name: str) -> ConvergenceTable:
    """Run a shipped spatial-study config"""
    config = parse_run_config(CONFIG_DIR / name)
    return convergence_study(
        get_case(config.case), config.r, config.levels, config.dt, config.t_final,
        base_resolution=config.base_resolution, pairing=config.pairing, initial=config.initial,
    )


# ============================================================================
# RATES AND CSV
# ============================================================================

class TestRateTable:
    """rate[i] = log2(err[i-1] / err[i])"""

    def test_rate(self):
        assert rate(2.0, 1.0) == pytest.approx(1.0)
        assert rate(8.0, 1.0) == pytest.approx(3.0)

    def test_rate_of_zero_error_is_empty(self):
        """A vanished error has no rate"""
        assert rate(0.0, 1.0) is None
        assert rate(1.0, 0.0) is None

    def test_rows_sorted_and_rates_filled(self, two_level_table):
        """First row has no rates, second holds log2 ratios"""
        first, second = two_level_table.rows
        assert (first.level, second.level) == (0, 1)
        assert first.rate_sigma is None and first.rate_u is None
        assert two_level_table.final_rates() == {'sigma': 1.0, 'dsigma': 1.0, 'u': 2.0}

    def test_csv_layout(self, two_level_table):
        """Header, empty level-0 rate cells, shortest round-trip digits"""
        assert two_level_table.to_csv() == (
            "level,h,err_sigma,rate_sigma,err_dsigma,rate_dsigma,err_u,rate_u\n"
            "0,0.25,4,,2,,1,\n"
            "1,0.125,2,1,1,1,0.25,2\n"
        )

    def test_csv_columns(self, two_level_table):
        assert two_level_table.to_csv().splitlines()[0].split(',') == CSV_COLUMNS

    def test_metadata(self, two_level_table):
        metadata = two_level_table.metadata()
        assert metadata['case'] == 'annulus2d'
        assert metadata['levels'] == 2
        assert metadata['dt'] == 1e-4


# ============================================================================
# STUDIES
# ============================================================================

class TestStudies:
    """solve_level, convergence_study and elliptic_study on small inputs"""

    def test_single_level(self):
        """Annulus n=4, two steps: h = 1/4, 72 unknowns, finite errors"""
        row = solve_level(get_case('annulus2d'), 1, 0, dt=1e-3, t_final=2e-3)
        assert row.h == pytest.approx(0.25)
        assert row.dofs == 72
        assert 0 < row.err_u < 1.0
        assert row.err_du >= 0

    def test_zero_initial_condition(self):
        """Zero start is accepted"""
        case = get_case('annulus2d')
        zero = solve_level(case, 1, 0, dt=1e-3, t_final=2e-3, initial='zero')
        projected = solve_level(case, 1, 0, dt=1e-3, t_final=2e-3)
        # u vanishes at t = 0, so both starts coincide
        assert zero.err_u == pytest.approx(projected.err_u, rel=1e-10)

    def test_one_level_rejected(self):
        with pytest.raises(InvalidParameterError):
            convergence_study(get_case('annulus2d'), 1, 1, dt=1e-3, t_final=1e-3)

    def test_two_levels(self):
        """Rates appear only on the second row"""
        table = convergence_study(get_case('annulus2d'), 1, 2, dt=1e-3, t_final=2e-3)
        assert [row.level for row in table.rows] == [0, 1]
        assert table.rows[0].rate_u is None
        assert table.rows[1].rate_u is not None

    @pytest.mark.parametrize('r', [1, 2])
    def test_elliptic_study_rate(self, r):
        """square2d_steady: ||u - u_hat|| rate within r +- 0.2 over two level pairs"""
        table = elliptic_study(get_case('square2d_steady'), r, 3)
        for row in table.rows[1:]:
            assert r - 0.2 <= row.rate_u <= r + 0.2
        assert table.rows[-1].p_norm == 0.0

    def test_temporal_validation(self):
        case = get_case('cube3d')
        with pytest.raises(InvalidParameterError):
            temporal_study(case, 0, [1e-3], t_final=0.01, reference_dt=1e-4)
        with pytest.raises(InvalidParameterError):
            temporal_study(case, 0, [2e-3, 1e-3], t_final=0.01, reference_dt=1e-3)


# ============================================================================
# PUBLISHED RATES
# ============================================================================

@pytest.mark.slow
class TestPublishedRates:
    """Final-pair rates of the shipped table configs"""

    def test_annulus_lowest_order(self):
        rates = run_spatial('table1.cfg').final_rates()
        assert 1.85 <= rates['sigma'] <= 2.15
        assert 0.9 <= rates['dsigma'] <= 1.1
        assert 0.9 <= rates['u'] <= 1.1

    def test_annulus_second_order(self):
        """Second-to-last pair; the finest sigma error is near round-off"""
        rates = run_spatial('table2.cfg').final_rates(pair=-2)
        assert 2.8 <= rates['sigma'] <= 3.2
        assert 1.9 <= rates['dsigma'] <= 2.1
        assert 1.85 <= rates['u'] <= 2.15

    def test_cube(self):
        table = run_spatial('table3.cfg')
        assert [row.h for row in table.rows] == pytest.approx([0.25, 0.125, 0.0625])
        rates = table.final_rates()
        assert 1.85 <= rates['sigma'] <= 2.15
        assert 0.85 <= rates['dsigma'] <= 1.1
        assert 0.85 <= rates['u'] <= 1.1

    def test_cube_is_deterministic(self):
        """Two runs give identical CSV text"""
        config = parse_run_config(CONFIG_DIR / 'table3.cfg')
        case = get_case(config.case)
        tables = [
            convergence_study(case, config.r, 2, config.dt, config.t_final, base_resolution=config.base_resolution)
            for _ in range(2)
        ]
        assert tables[0].to_csv() == tables[1].to_csv()

    def test_backward_euler_first_order(self):
        """cube3d on the n=8 mesh: fitted time-error rate in [0.8, 1.2]"""
        config = parse_run_config(CONFIG_DIR / 'temporal.cfg')
        study = temporal_study(
            get_case(config.case), config.level, config.dts, config.t_final,
            config.reference_dt, r=config.r, base_resolution=config.base_resolution,
        )
        assert 0.8 <= study.fitted_rate <= 1.2
        assert study.rates[0] is None
        assert study.to_csv().splitlines()[0] == 'dt,time_error,rate,err_u'


if __name__ == "__main__":
    """Run tests with pytest"""
    pytest.main([__file__, "-v", "--tb=short"])
