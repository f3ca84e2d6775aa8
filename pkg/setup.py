import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

with open('requirements.txt') as f:
    requirements = f.read().splitlines()

setuptools.setup(
    name="gnslab",
    use_scm_version=True,
    setup_requires=['setuptools_scm'],
    description="Numerical lab for sharp Gagliardo-Nirenberg-Sobolev inequalities "
    "in one dimension.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests*"]),
    install_requires=requirements,
    entry_points={
        "console_scripts": ["gnslab = gnslab.cli:main"]
    },
    classifiers=[
        "Programming Language :: Python :: 3.7",
        "Programming Language :: Python :: Implementation :: CPython",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Operating System :: OS Independent"
    ]
)
