# Sphinx configuration for the bubblelab documentation.

import datetime
import os
import sys

sys.path.insert(0, os.path.abspath('../'))

import bubblelab  # noqa: E402

# -- Project -----------------------------------------------------------------

project = 'bubblelab'
author = 'bubblelab developers'
copyright = '{}, {}'.format(datetime.datetime.now().year, author)
version = bubblelab.__version__
release = bubblelab.__version__

# -- Sources -----------------------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.napoleon',
    'sphinx.ext.mathjax',
    'sphinx.ext.intersphinx',
    'sphinx.ext.viewcode',
]

master_doc = 'index'
source_suffix = '.rst'
language = 'en'
exclude_patterns = ['_build']

# Docstrings follow the numpy standard; shapes and chart conventions live in
# the parameter sections.
napoleon_google_docstring = False
napoleon_numpy_docstring = True
napoleon_use_rtype = False

autodoc_member_order = 'bysource'
autodoc_default_options = {
    'members': True,
    'special-members': '__init__',
}
# plotting and graph rendering are optional at documentation build time
autodoc_mock_imports = ['matplotlib', 'graphviz']

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
    'pandas': ('https://pandas.pydata.org/docs/', None),
}

# -- Output ------------------------------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_theme_options = {
    'collapse_navigation': False,
    'navigation_depth': 3,
}
htmlhelp_basename = 'bubblelabdoc'

latex_documents = [
    (master_doc, 'bubblelab.tex', 'bubblelab: curvature densities and bubble trees',
     author, 'manual'),
]
man_pages = [
    (master_doc, 'bubblelab', 'bubblelab command line and API', [author], 1),
]
