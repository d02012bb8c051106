"""Builds the pmc_py extension by delegating to cargo.

Install with `pip install -e . --no-build-isolation`; the only build
requirement beyond setuptools is a Rust toolchain.
"""

import shutil
import subprocess
from pathlib import Path

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension

ROOT = Path(__file__).resolve().parent


class CargoExtension(Extension):
    def __init__(self):
        super().__init__("pmc_py", sources=[])


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "pmc-py"],
            cwd=ROOT,
            check=True,
        )
        built = ROOT / "target" / "release" / "libpmc_py.so"
        if not built.exists():
            # macOS names cdylibs differently
            built = ROOT / "target" / "release" / "libpmc_py.dylib"
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(built, dest)


setup(
    name="pmc-py",
    version="0.1.0",
    description="Prescribed mean curvature solver with zero-order absorption",
    packages=[],
    ext_modules=[CargoExtension()],
    cmdclass={"build_ext": CargoBuildExt},
    zip_safe=False,
)
