"""Freeze reference FCI spectra for the bundled fixtures into tests/golden/.

Each JSON file records the fixture stem, the sector, and the lowest few
exact eigenvalues as produced by cqesim.oracle.fci_solve at generation
time.  The test suite re-solves every fixture and compares against these
committed numbers, so silent regressions in either the Hamiltonian
assembly or the eigensolver show up as golden mismatches.
"""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from cqesim.hamiltonian import build_hamiltonian, list_fixtures, load_fixture
from cqesim.oracle import fci_solve

GENERATOR_VERSION = 1
N_STATES = 4

OUT_DIR = pathlib.Path(__file__).resolve().parents[1] / "tests" / "golden"


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for stem in list_fixtures():
        integrals = load_fixture(stem)
        ham = build_hamiltonian(integrals)
        energies, _ = fci_solve(ham, n_states=N_STATES)
        record = {
            "fixture": stem,
            "n_electrons": integrals.n_electrons,
            "sz_twice": integrals.ms2,
            "eigenvalues": [float(e) for e in energies],
            "generator_version": GENERATOR_VERSION,
        }
        path = OUT_DIR / f"{stem}.json"
        path.write_text(json.dumps(record, indent=2) + "\n")
        print(f"{stem:12s} E0={energies[0]:.10f}")
    print(f"wrote golden files to {OUT_DIR}")


if __name__ == "__main__":
    main()
