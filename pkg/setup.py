from setuptools import find_packages
from setuptools import setup

setup(name="infantcry_tools",
      version="0.1.0",
      author="infantcry_tools developers",
      license="GPLv3.0",
      description="Infant cry detection and classification on log-mel spectrograms, "
                  "with pooling heads, transfer learning and model compression.",
      long_description_content_type="text/markdown",
      long_description=open("README.md").read(),
      packages=find_packages(exclude=["tests"]),
      classifiers=["License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
                   "Operating System :: OS Independent",
                   "Programming Language :: Python :: 3",
                   "Topic :: Scientific/Engineering"],
      python_requires=">=3.7",
      install_requires=["numpy>=1.15",
                        "MarkupPy",
                        "pytz",
                        "pandas",
                        "scipy",
                        "pyYAML",
                        "matplotlib"],
      extras_require={"test": ["pytest"]},
      entry_points={"console_scripts": ["infantcry=infantcry_tools.automation.cli:main"]},
      include_package_data=True
      )
