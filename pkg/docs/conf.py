#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# terranp documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import os
import sys
from typing import Dict

sys.path.insert(0, os.path.abspath("../"))

from terranp import __version__  # noqa: E402

# -- General configuration ------------------------------------------------
BASEPATH = os.path.abspath(os.path.dirname(__file__))

extensions = ["sphinx.ext.autodoc", "sphinx.ext.napoleon"]

templates_path = ["_templates"]

source_suffix = ".rst"

master_doc = "index"

project = "terranp"
copyright = "2026, TerraNP developers"
author = "TerraNP developers"

# The full version, including alpha/beta/rc tags.
version = release = __version__

language = "en"

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

pygments_style = "sphinx"

todo_include_todos = False

# numpy-heavy signatures read better without the type annotations inline
autodoc_typehints = "description"


# -- Options for HTML output ----------------------------------------------

html_theme = "sphinx_rtd_theme"


# -- Options for HTMLHelp output ------------------------------------------

htmlhelp_basename = "terranpdoc"


# -- Options for LaTeX output ---------------------------------------------

latex_elements: Dict[str, str] = {}

latex_documents = [
    (master_doc, "terranp.tex", "terranp Documentation", author, "manual")
]


# -- Options for manual page output ---------------------------------------

man_pages = [(master_doc, "terranp", "terranp Documentation", [author], 1)]


# -- Options for Texinfo output -------------------------------------------

texinfo_documents = [
    (
        master_doc,
        "terranp",
        "terranp Documentation",
        author,
        "terranp",
        "Probabilistic BEV terrain elevation mapping with semantic neural processes.",
        "Miscellaneous",
    )
]
