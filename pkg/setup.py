#!/usr/bin/env python

import os
import re

from setuptools import find_packages, setup


def read(fname):
    return open(os.path.join(os.path.dirname(__file__), fname)).read()


def read_version(fname):
    return re.search("__version__ = ['\"]([^'\"]+)['\"]", read(fname)).group(1)


setup(
    name='django-gridledger',
    version=read_version('gridledger/__init__.py'),
    description='Privacy-preserving demand/load reporting and contract-gated load control on a permissioned ledger.',
    license='MIT',
    long_description=(read('README.rst')),
    packages=find_packages(exclude=['tests*']),
    zip_safe=False,
    python_requires='>=3.8',
    install_requires=[
        'Django>=3.2',
        'djangorestframework>=3.12',
        'cryptography>=3.4',
        'tomli>=1.1; python_version < "3.11"',
    ],
    entry_points={
        'console_scripts': ['gridledger=gridledger.cli:main'],
    },
    classifiers=[
        'License :: OSI Approved :: MIT License',
        'Framework :: Django',
        'Framework :: Django :: 3.2',
        'Framework :: Django :: 4.1',
        'Framework :: Django :: 4.2',
        'Intended Audience :: Developers',
        'Intended Audience :: Science/Research',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Security :: Cryptography',
        'Topic :: Scientific/Engineering',
    ],
)
