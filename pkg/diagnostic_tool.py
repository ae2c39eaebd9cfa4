"""
Chebyshev Network Harness - Diagnostic Tool

Prints the active configuration and the software environment, and checks
the Chebyshev basis against its closed form so numerical trouble on a new
machine shows up before a long experiment does.
"""

import platform
import sys

import numpy as np

from chebybasis import cheb_eval_all, cheb_roots
from config import Config

# Basis checks pass below this absolute error
TOLERANCE = 1e-10


def print_header(title):
    """Print a formatted header."""
    print("\n" + "=" * 60)
    print(f"  {title}")
    print("=" * 60)


def print_section(title):
    """Print a section title."""
    print("\n" + "-" * 40)
    print(f"  {title}")
    print("-" * 40)


def environment_stamp():
    """Versions recorded in every results document."""
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


def check_config(path=None):
    """Print the experiment settings that will be used."""
    print_section("Configuration Check")
    config = Config.get_config(path)
    for key, value in sorted(config["experiment"].items()):
        print(f"{key}: {value}")
    print(f"Output directory: {config.get('output_dir')}")
    return config


def check_environment():
    print_section("Environment Check")
    stamp = environment_stamp()
    for key, value in stamp.items():
        print(f"{key}: {value}")
    return stamp


def check_basis(max_order=10, n_points=200):
    """Compare the recurrence with cos(j theta) and check T_j vanishes at its roots.

    Returns:
        dict: Worst absolute errors of both checks and whether they pass
    """
    print_section("Chebyshev Basis Check")
    theta = np.linspace(0.0, np.pi, n_points)
    basis = cheb_eval_all(max_order, np.cos(theta))
    closed_form = np.cos(np.arange(max_order + 1)[:, None] * theta[None, :])
    recurrence_error = float(np.max(np.abs(basis - closed_form)))

    root_error = 0.0
    for j in range(1, max_order + 1):
        values = cheb_eval_all(j, cheb_roots(j))[j]
        root_error = max(root_error, float(np.max(np.abs(values))))

    ok = recurrence_error <= TOLERANCE and root_error <= TOLERANCE
    mark = "OK" if ok else "FAILED"
    print(f"Recurrence vs cos(j theta), j <= {max_order}: max error {recurrence_error:.3e}")
    print(f"T_j at its roots, j <= {max_order}: max |T_j| {root_error:.3e}")
    print(f"Basis check: {mark}")
    return {"recurrence_error": recurrence_error, "root_error": root_error, "ok": ok}


def run_diagnostics(config_path=None):
    """Run all diagnostic checks; returns True if the basis check passed."""
    print_header("Chebyshev Network Harness - Diagnostic Tool")
    check_config(config_path)
    check_environment()
    result = check_basis()
    print("\n" + "=" * 60)
    print("  Diagnostics Complete")
    print("=" * 60)
    return result["ok"]


if __name__ == "__main__":
    sys.exit(0 if run_diagnostics(sys.argv[1] if len(sys.argv) > 1 else None) else 1)
