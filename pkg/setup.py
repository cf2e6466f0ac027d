from setuptools import setup, find_packages

setup(
    name='bayesrisk',
    version='0.1.0',       # The version is also stored in bayesrisk/version.py
    license='MIT',
    description='Bayesian risk optimization: conjugate posteriors, risk functionals and asymptotic experiments',
    long_description='Bayesian risk optimization: conjugate posteriors, risk functionals and asymptotic experiments',

    packages=find_packages(),

    platforms='any',
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.7',
        'pandas>=1.1',
        'click',
        'PyYAML>=5.1',
        'pydantic>=2.0',
    ],
    extras_require={
        'test': ['pytest', 'hypothesis'],
    },

    entry_points={
        'console_scripts': ['bayesrisk=bayesrisk.cli:cli'],
    },

    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3'
    ],
)
