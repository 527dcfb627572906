import os
import shutil
from setuptools import setup, find_packages

# Remove build and dist directories if they exist
for dir_name in ['build', 'dist']:
    if os.path.exists(dir_name):
        shutil.rmtree(dir_name)

setup(
    name='pyvinp',
    version='0.1.0',
    packages=find_packages('.', exclude=['tests', 'tests.*', 'examples', 'examples.*']),
    python_requires='>=3.10',
    install_requires=[
        'numpy',
        'scipy',
    ],
    extras_require={
        'test': [
            'pytest',
            'hypothesis',
        ],
    },
    entry_points={
        'console_scripts': [
            'vinp=vinp.cli:main',
        ],
    },
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
)
