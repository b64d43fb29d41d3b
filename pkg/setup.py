#!/usr/bin/env python
from __future__ import print_function

import os
import sys

v = sys.version_info
if v[:2] < (3, 9):
    error = "ERROR: cliqueopf requires Python version 3.9 or above."
    print(error, file=sys.stderr)
    sys.exit(1)

from setuptools import setup

pjoin = os.path.join
here = os.path.abspath(os.path.dirname(__file__))

# Get the current package version.
version_ns = {}
integration_str = "cliqueopf"

with open(pjoin(here, integration_str + "_core", "_version.py")) as f:
    exec(f.read(), {}, version_ns)

setup_args = dict(
    name="jupyter_" + integration_str,
    packages=[integration_str + "_core", integration_str + "_utils"],
    version=version_ns["__version__"],
    description=version_ns["__desc__"],
    long_description="Clique-decomposed SDP relaxation of optimal power flow, solved by primal \
        (resource allocation) or dual (price consensus) coordination, with a CLI and a Jupyter magic",
    license="Apache",
    platforms="Linux, Mac OS X, Windows",
    keywords=["Optimal Power Flow", "Semidefinite Programming", "Chordal", "Distributed", "Jupyter",
              integration_str],
    classifiers=[
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    entry_points={"console_scripts": [f"{integration_str}={integration_str}_core.__main__:main"]},
    extras_require={"test": ["pytest", "cvxpy"]},
    zip_safe=False
)

# setuptools requirements
setup_args["install_requires"] = install_requires = []
with open(pjoin(here, "requirements.txt")) as f:
    for line in f.readlines():
        req = line.strip()
        if not req or req.startswith(("-e", "#")):
            continue
        install_requires.append(req)


def main():
    setup(**setup_args)

if __name__ == "__main__":
    main()
