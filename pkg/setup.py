import os
from setuptools import setup

with open(os.path.join(os.path.abspath(os.path.dirname(__file__)), "README.md")) as f:
    README = f.read()

setup(
    # Needed to silence warnings (and to be a worthwhile package)
    name="waistPy",
    url="tbd",
    author="waistPy authors",
    # Needed to actually package something
    packages=["waistPy"],
    # Needed for dependencies
    install_requires=["numpy>=1.24.2,<2.0",
                      "pandas>=2.0.0",
                      "scipy>=1.10",
                      "cvxpy>=1.3",
                      "POT>=0.9"],
    extras_require={"test": ["pytest>=7.0", "hypothesis>=6.0"]},
    entry_points={"console_scripts": ["waistpy = waistPy.cli:main"]},
    # *strongly* suggested for sharing
    version="0.1.0",
    # The license can be anything you like
    license="MIT",
    description="Numerical experiments around waist inequalities for Gaussian, spherical and projective measures",
    long_description=README,
)
