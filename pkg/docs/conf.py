# Configuration file for the Sphinx documentation builder.
#
# For the full list of built-in configuration values, see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Project information -----------------------------------------------------
# https://www.sphinx-doc.org/en/master/usage/configuration.html#project-information

import pathlib

project = "Larch"
copyright = "2026, Larch Developers"
author = "Larch Developers"

# -- General configuration ---------------------------------------------------
# https://www.sphinx-doc.org/en/master/usage/configuration.html#general-configuration

extensions = [
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "pydoctor.sphinx_ext.build_apidocs",
    "sphinx.ext.autosectionlabel",
]

_project_root = pathlib.Path(__file__).parent.parent
_source_root = _project_root / "src"

# -- Extension configuration ----------------------------------------------

pydoctor_args = [
    "--intersphinx=https://docs.twisted.org/en/twisted-23.10.0/api/objects.inv",
    "--intersphinx=https://docs.python.org/3/objects.inv",
    "--intersphinx=https://numpy.org/doc/stable/objects.inv",
    f"--project-base-dir={_source_root}",
    "--html-output={outdir}/api",
    "--docformat=epytext",
    "--privacy=HIDDEN:larch.test.*",
    "--privacy=HIDDEN:larch.test",
    "--privacy=HIDDEN:**.__post_init__",
    str(_source_root / "larch"),
]
pydoctor_url_path = "/en/{rtd_version}/api/"
intersphinx_mapping = {
    "py3": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "twisted": ("https://docs.twisted.org/en/twisted-23.10.0/api", None),
}

templates_path = ["_templates"]
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]


# -- Options for HTML output -------------------------------------------------
# https://www.sphinx-doc.org/en/master/usage/configuration.html#options-for-html-output

html_theme = "alabaster"
html_static_path = ["_static"]
htmlhelp_basename = "Larchdoc"
