#!/usr/bin/env python3
"""
Setup helper for extprof
"""
import os
import sys
import subprocess
import argparse

ROOT = os.path.dirname(os.path.abspath(__file__))


def check_dependencies():
    """Check if all required dependencies are installed"""
    required_packages = ['numpy', 'scipy', 'pandas']

    optional_packages = [
        ('pytest', 'test suite'),
        ('pytest_cov', 'coverage report'),
    ]

    missing_required = []
    missing_optional = []

    for package in required_packages:
        try:
            __import__(package)
            print(f"✓ {package}")
        except ImportError:
            missing_required.append(package)
            print(f"✗ {package} (REQUIRED)")

    for package, feature in optional_packages:
        try:
            __import__(package)
            print(f"✓ {package} ({feature})")
        except ImportError:
            missing_optional.append((package, feature))
            print(f"✗ {package} ({feature}) - OPTIONAL")

    return missing_required, missing_optional


def install_dependencies():
    """Install required dependencies"""
    print("Installing dependencies...")
    try:
        subprocess.check_call([sys.executable, '-m', 'pip', 'install', '-r',
                               os.path.join(ROOT, 'requirements.txt')])
        print("Dependencies installed successfully!")
    except subprocess.CalledProcessError as e:
        print(f"Error installing dependencies: {e}")
        return False
    return True


def run_tests(coverage=False):
    """Run the test suite through pytest"""
    print("Running tests...")
    command = [sys.executable, '-m', 'pytest', 'tests', 'test_integration.py', '-q']
    if coverage:
        command += ['--cov=extprof', '--cov-report=term-missing']
    result = subprocess.run(command, cwd=ROOT)
    if result.returncode == 0:
        print("✓ tests passed")
        return True
    print(f"✗ pytest exited with status {result.returncode}")
    return False


def run_validation(quick=True):
    """Run the numerical invariant suite"""
    print("Running validation...")
    command = [sys.executable, os.path.join(ROOT, 'run.py'), 'validate']
    if quick:
        command.append('--quick')
    return subprocess.run(command, cwd=ROOT).returncode == 0


def main():
    parser = argparse.ArgumentParser(description='extprof setup helper')
    parser.add_argument('--check-deps', action='store_true',
                        help='Check dependencies')
    parser.add_argument('--install-deps', action='store_true',
                        help='Install dependencies')
    parser.add_argument('--run-tests', action='store_true',
                        help='Run test suite')
    parser.add_argument('--coverage', action='store_true',
                        help='Report coverage with the tests')
    parser.add_argument('--validate', action='store_true',
                        help='Run the full invariant suite (slow)')
    parser.add_argument('--setup', action='store_true',
                        help='Check and install dependencies')

    args = parser.parse_args()

    if args.check_deps or args.setup:
        print("=== Checking Dependencies ===")
        missing_required, _ = check_dependencies()

        if missing_required:
            print(f"\nMissing required packages: {missing_required}")
            if args.setup:
                if not install_dependencies():
                    sys.exit(1)
            else:
                print("Run with --install-deps to install them")
                sys.exit(1)

    if args.install_deps:
        install_dependencies()

    if args.run_tests or args.coverage:
        print("\n=== Running Tests ===")
        if not run_tests(coverage=args.coverage):
            sys.exit(1)

    if args.validate:
        print("\n=== Running Validation ===")
        if not run_validation(quick=False):
            sys.exit(1)

    if not any(vars(args).values()):
        parser.print_help()


if __name__ == '__main__':
    main()
