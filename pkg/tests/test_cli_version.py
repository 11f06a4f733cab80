import os
import subprocess
import sys
from pathlib import Path


def test_cli_version_exits_zero_and_prints_version():
    root = Path(__file__).resolve().parent.parent
    proc = subprocess.run(
        [sys.executable, str(root / "main.py"), "version"],
        capture_output=True,
        text=True,
        cwd=str(root),
        check=False,
    )
    assert proc.returncode == 0
    stdout = proc.stdout + proc.stderr
    assert "DexPlan v" in stdout




def test_check_help_names_the_derivative_error_measure():
    root = Path(__file__).resolve().parent.parent
    env = dict(os.environ, COLUMNS="200", TERMINAL_WIDTH="200")
    proc = subprocess.run(
        [sys.executable, str(root / "main.py"), "check", "--help"],
        capture_output=True,
        text=True,
        cwd=str(root),
        env=env,
        check=False,
    )
    assert proc.returncode == 0
    assert "max(1" in proc.stdout
