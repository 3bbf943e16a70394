import pathlib

import setuptools


root_dir = pathlib.Path(__file__).parent

exec((root_dir / "src" / "driftlab" / "version.py").read_text(encoding="utf-8"))

long_description = (root_dir / "README.rst").read_text(encoding="utf-8")

# Static values are declared in pyproject.toml.
setuptools.setup(
    version=version,
    long_description=long_description,
    long_description_content_type="text/x-rst",
)
