#!/usr/bin/env python3
"""
Developer entry points for kamsynth: dependency install, smoke checks, the pytest suite
and a demo run of the example abstractions.
"""

import subprocess
import sys

DEMO_RUNS = [
    ("Chain bisimulation", ["abstract", "--algo", "bisim", "--model", "fig3"]),
    ("Chain KAM", ["abstract", "--algo", "kam", "--model", "fig3", "--budget", "10"]),
    ("Module chain KAM", ["abstract", "--algo", "kam", "--model", "fig4", "--budget", "5", "--termcond", "budget"]),
    ("Grid on sigma1", ["abstract", "--algo", "grid", "--model", "sigma1", "--eta", "0.2"]),
    ("KAM on sigma2", ["abstract", "--algo", "kam", "--model", "sigma2", "--budget", "12"]),
]


def _step(banner: str, argv) -> bool:
    print(banner)
    result = subprocess.run([sys.executable, *argv])
    if result.returncode != 0:
        print(f"❌ {' '.join(argv)} exited with {result.returncode}")
        return False
    return True


def install() -> bool:
    ok = _step("📦 Installing requirements.txt ...", ["-m", "pip", "install", "-r", "requirements.txt"])
    if ok:
        print("✅ Environment ready")
    return ok


def smoke() -> bool:
    return _step("🧪 Smoke checks ...", ["test_main.py"])


def test() -> bool:
    return _step("🧪 pytest ...", ["-m", "pytest", "-q"])


def demo() -> bool:
    """Print the report of every demo run; a non-zero exit does not stop the rest."""
    finished = 0
    for title, argv in DEMO_RUNS:
        if _step(f"\n🔍 {title}: kamsynth {' '.join(argv)}", ["-m", "kamsynth", *argv]):
            finished += 1
    print(f"\n📊 {finished}/{len(DEMO_RUNS)} demo runs exited cleanly")
    return finished == len(DEMO_RUNS)


def usage() -> bool:
    print("""
🧭 kamsynth developer script

  python start.py install   pip install -r requirements.txt
  python start.py smoke     imports, settings, model catalog, one pipeline run
  python start.py test      full pytest suite
  python start.py demo      reports for the example models

Settings come from KAMSYNTH_* environment variables or .env,
e.g. KAMSYNTH_LOG_LEVEL=DEBUG or KAMSYNTH_KAM_NODE_LIMIT=500000.
""")
    return True


COMMANDS = {"install": install, "smoke": smoke, "test": test, "demo": demo, "help": usage}


if __name__ == "__main__":
    name = sys.argv[1].lower() if len(sys.argv) > 1 else "help"
    handler = COMMANDS.get(name)
    if handler is None:
        print(f"❌ Unknown command: {name}")
        usage()
        sys.exit(2)
    sys.exit(0 if handler() else 1)
