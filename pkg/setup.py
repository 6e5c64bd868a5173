from setuptools import find_packages, setup

setup(
    name="kicq",
    version="0.1",
    description=(
        "Keyword-aware influential community queries over attributed graphs"
    ),
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "torch>=1.11.0",
        "networkx>=2.6",
    ],
    extras_require={
        "tests": [  # install with `pip install -e ".[tests]"`
            "pytest>=7.1.2",
        ],
    },
    entry_points={
        "console_scripts": ["kicq=kicq.cli:main"],
    },
)
