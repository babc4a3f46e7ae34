from setuptools import setup


setup(
    name="E2C",

    packages=['E2C'],

    version='0.1.0',

    description="Equity-to-credit spread approximations and a random forest correcting them towards the 5y CDS",

    keywords=['E2C', 'CDS', 'CreditGrades', 'credit', 'random forest'],

    classifiers=[],

    install_requires=['numpy', 'astropy', 'scipy', 'joblib'],

    extras_require={'test': ['pytest']},

    entry_points={'console_scripts': ['e2c = E2C.cli:main']},

)
