#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
beeplab: leader election and loneliness detection in single-hop beeping networks
Setup & installation configuration
"""

from setuptools import setup, find_packages

with open('README.md', 'r', encoding='utf-8') as f:
    long_description = f.read()

setup(
    name='beeplab',
    version='1.0.0',
    description='Beeping-network leader election simulator, protocol library and exact analyzer',
    long_description=long_description,
    long_description_content_type='text/markdown',
    license='MIT',
    packages=find_packages(exclude=('tests', 'tests.*', 'examples', 'examples.*')),
    py_modules=['app'],
    data_files=[('static/programs', ['static/programs/parity.cm',
                                     'static/programs/compare.cm',
                                     'static/programs/threshold.cm'])],
    python_requires='>=3.9',
    install_requires=[
        'Flask>=3.0.0',
        'gunicorn>=22.0.0',
        'Werkzeug>=3.0.0',
        'python-dotenv>=1.0.0',
        'Flask-Limiter>=3.5.0',
        'numpy>=1.24.0',
        'pandas>=2.0.0',
    ],
    extras_require={
        'dev': [
            'pytest>=7.4.0',
            'pytest-cov>=4.1.0',
            'pytest-flask>=1.2.0',
            'hypothesis>=6.80.0',
        ],
    },
    entry_points={
        'console_scripts': ['beeplab=beeping.cli:main'],
    },
    classifiers=[
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'Framework :: Flask',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering',
    ],
    keywords='beeping model leader election distributed algorithms simulation',
)
