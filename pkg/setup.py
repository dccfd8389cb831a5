#!/usr/bin/env python3
# coding=utf-8

"""Standard setup.py. Speaks for itself."""

from setuptools import setup, find_packages

with open('README.md', 'r') as fh:
    long_description = fh.read()

setup(
    name='rdmixtool',
    version='1.0.0',
    packages=find_packages(),
    license='GPLv3',
    install_requires=['numpy>=1.22', 'scipy>=1.8', 'pandas>=1.5', 'PyYAML>=6.0',
                      'statsmodels>=0.13', 'arviz>=0.14'],
    description='Bayesian mixture-model analysis of regression discontinuity designs under '
                'local randomization.',
    long_description=long_description,
    long_description_content_type="text/markdown",
    entry_points={'console_scripts': ['rdmixtool=rdmixtool.cli_tool:main']},
    python_requires='>=3.8',
    classifiers=[
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
        "OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
    ],

)
