from setuptools import setup, find_packages

long_description = """ncwno is a Python library for continual learning of neural operators on parametric partial
differential equations. A single operator mixes a bank of wavelet experts through task-conditioned gates, so that

- a foundation model is trained jointly on several equation families,
- new families are learned by fitting the gates only, and
- every learned family can be recalled without forgetting.

The package also ships reference solvers and Gaussian random field samplers that generate the training data, and a
command-line interface (``ncwno``) for generating data, training, transfer, evaluation and expert ablations."""

setup(
    name='ncwno',
    version='0.1.0',
    description='Continual wavelet neural operators for parametric PDEs.',
    long_description=long_description,
    author='ncwno developers',
    packages=find_packages(exclude=['tests']),
    install_requires=['numpy>=1.17.0', 'scipy', 'scikit-learn', 'PyWavelets', 'PyYAML'],
    test_requires=['pytest', 'flake8'],
    entry_points={'console_scripts': ['ncwno=ncwno.cli:main']},
    python_requires='>=3.7',
)
