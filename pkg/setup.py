"""Setup script for the project"""

from setuptools import setup, find_packages

setup(
    name="grassfield",
    version="0.1.0",
    description="Adaptive Grassmann-manifold sampling and full-field interpolation for uncertainty quantification",
    author="Your Name",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "pandas>=2.1.0",
        "tqdm>=4.66.0",
        "plotly>=5.17.0",
        "python-dotenv>=1.0.0",
    ],
    extras_require={
        "test": ["pytest>=7.4.0"],
    },
    python_requires=">=3.9",
)
