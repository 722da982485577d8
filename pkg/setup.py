import setuptools

with open('README.md', 'r') as f:
    long_description = f.read()

setuptools.setup(
    name='fogcrypt',
    version='0.1.0',
    author='The fogcrypt authors',
    description="Hash-based lightweight encryption for IoT to fog links",
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=setuptools.find_packages(exclude=['tests', 'tests.*', 'examples', 'examples.*']),
    package_data={'fogcrypt': ['scenarios/*.json']},
    python_requires='>=3.8',
    install_requires=[
        'transformers>=4.30',
        'numpy>=1.22',
        'pandas>=1.4',
        'tqdm',
        'cryptography>=41',
    ],
    extras_require={
        'test': ['pytest>=7', 'hypothesis>=6'],
    },
    entry_points={
        'console_scripts': ['fogcrypt = fogcrypt.cli:main'],
    },
)
