"""Rebuild the regression checkpoints in this directory: ``python3 tests/data/regenerate.py``."""

from pathlib import Path

from hartree_balance.checkpoint import save_ground_state
from hartree_balance.ground_state import (
    minimize_critical,
    minimize_global,
    minimize_pohozaev,
    solve_choquard,
    solve_zero_mass,
)
from hartree_balance.spectral_core import build_kernels, make_grid, make_radial_grid

HERE = Path(__file__).parent


def main() -> None:
    g = make_grid(3, 8.0, 32)
    q = solve_choquard(g, 2.0)
    save_ground_state(HERE / "choquard_g2.hbal", q)
    save_ground_state(HERE / "supercritical_c1.hbal", minimize_pohozaev(g, 1.0, build_kernels(g, 2.5, 1.0)))
    save_ground_state(
        HERE / "critical_c1p5.hbal", minimize_critical(g, 1.5 * q.c, build_kernels(g, 2.0, 1.0), choquard_state=q)
    )
    save_ground_state(HERE / "subcritical_c12.hbal", minimize_global(g, 12.0, build_kernels(g, 1.5, 0.5)))
    rg = make_radial_grid(5, 512, 40.0)
    save_ground_state(HERE / "zero_mass_n5.hbal", solve_zero_mass(rg, build_kernels(rg, 3.0, 2.0)))


if __name__ == "__main__":
    main()
