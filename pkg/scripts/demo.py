#!/usr/bin/env python3
"""
Complete Demo Script - beambit
Runs all components of the system in sequence on the tiny config
"""
import sys
from pathlib import Path
import time

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))


def print_header(text):
    """Print formatted header"""
    print("\n" + "="*70)
    print(f"  {text}")
    print("="*70 + "\n")


def print_step(step_num, text):
    """Print step indicator"""
    print(f"\n{'─'*70}")
    print(f"📍 STEP {step_num}: {text}")
    print(f"{'─'*70}\n")
    time.sleep(0.5)


def main():
    """Run complete demo"""
    import subprocess
    import os

    # Change to project root
    project_root = Path(__file__).parent.parent
    os.chdir(project_root)

    python_exe = sys.executable
    cli = [python_exe, "scripts/beambit.py"]

    print_header("📡 BEAMBIT - COMPLETE DEMO")

    print("This demo will run the complete selection pipeline:")
    print("  1. Write sample configs and a sample instance")
    print("  2. Solve one config with the joint selector (with trace)")
    print("  3. Sweep transmit power for all schemes")
    print("  4. Summarize energy and complexity tables")
    print("  5. Run the quick acceptance checks")
    print("\nPress Enter to continue...")
    input()

    print_step(1, "Generating Sample Configs")
    subprocess.run([python_exe, "scripts/generate_sample_configs.py"], check=True)

    print_step(2, "Solving With the Joint Selector")
    subprocess.run(cli + ["solve", "--config", "configs/tiny.json", "--algo", "joint",
                          "--out", "outputs/tiny_joint.csv", "--trace"], check=True)

    print_step(3, "Sweeping Transmit Power")
    subprocess.run(cli + ["sweep", "--config", "configs/tiny.json", "--axis", "power",
                          "--out", "outputs/tiny_power.csv"], check=True)

    print_step(4, "Summarizing Tables")
    subprocess.run(cli + ["tables", "--in", "outputs/tiny_power.csv",
                          "--out", "outputs/tiny_tables.csv"], check=True)

    print_step(5, "Running Acceptance Checks")
    subprocess.run(cli + ["verify", "--quick"], check=True)

    print_header("✅ DEMO COMPLETE")

    print("📊 Generated Files:")
    print("   • 3 experiment configs in configs/")
    print("   • sample_data/instance_tiny.json")
    print("   • per-drop, sweep and table CSVs in outputs/")

    print("\n🚀 Next Steps:")
    print("   • Run configs/rayleigh_desk.json for the desk-scale comparison")
    print("   • Read USAGE_GUIDE.md for the config fields and CSV columns")

    return 0


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\n⚠️  Demo interrupted by user")
        sys.exit(1)
    except Exception as e:
        print(f"\n\n❌ Error during demo: {e}")
        sys.exit(1)
