import os

from setuptools import setup


base_dir = os.path.dirname(__file__)

about = {}
with open(os.path.join(base_dir, 'mqrk', '__about__.py')) as f:
    exec(f.read(), about)


REQUIREMENTS = [
    'numpy',
    'scipy',
    'sympy',
]

TEST_REQUIREMENTS = [
    'pytest',
]

setup(
    version=about['__version__'],
    install_requires=REQUIREMENTS,
    tests_require=TEST_REQUIREMENTS,
    extras_require={
        'typeguard': ['typeguard>=4'],
        'test': TEST_REQUIREMENTS,
    },
    entry_points={
        'console_scripts': ['mqrk = mqrk.cli:main'],
    },
)
