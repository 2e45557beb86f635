from setuptools import setup, find_packages

from clecli import __version__

with open('README.md', 'r') as readme:
    long_description = readme.read()

setup(
    name='clecli',
    version=__version__,
    description='Cross-lingual word embedding alignment command line.',
    long_description=long_description,
    packages=find_packages('.', exclude=['tests']),
    python_requires='>=3.6',
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.6',
        'tornado>=6',
        'pyyaml>=5.1',
        'lazy-property==0.0.1',
        'six',
    ],
    test_suite='tests',
    entry_points={
        'console_scripts': [
            'cle = clecli.cli:main',
        ],
    },
    classifiers=[
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'License :: OSI Approved :: BSD License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Operating System :: OS Independent',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ]
)
