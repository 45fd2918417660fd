from setuptools import setup, find_packages

setup(
    name="dwdt",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    install_requires=[
        "numpy>=1.24",                        # arrays and every numerical kernel
        "scipy>=1.10",                        # cKDTree neighbours, sparse adjacency, convex hulls
        "shapely>=2.1",                       # boundary polygons, clipping, constrained triangulation
        "matplotlib>=3.7",                    # SVG renderings of triangulations
        "pydantic>=2.0",                      # run configuration and report models
        "python-dotenv>=1.0.0",               # for environment variables
    ],
    extras_require={
        "dev": [
            "pytest>=8.0.0",
            "black>=24.1.1",
            "flake8>=7.0.0",
            "mypy>=1.8.0",
        ],
    },
    entry_points={"console_scripts": ["dwdt=pipelines.orchestrator:main"]},
    description="Differentiable weighted Delaunay triangulation and surface remeshing",
    license="GPL-3.0",
    python_requires=">=3.9",
)
