from setuptools import setup, find_packages

setup(
    name="mecor-sae",
    version="0.1.0",
    description="Area-level small area estimation with correlated measurement and sampling errors",
    python_requires=">=3.10",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pandas>=2.0",
        "python-dotenv>=1.0.0",
        "pydantic>=2.0.0",
        "loguru>=0.7.0",
        "pyyaml>=6.0",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": [
            "mecor-sae=src.main:main",
        ],
    },
)
