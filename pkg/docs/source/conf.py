# -*- coding: utf-8 -*-
#
# datalad_perturb documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import datetime

import datalad_perturb

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.doctest',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinx.ext.napoleon',
    'sphinx_copybutton',
]

autosummary_generate = True

# generated command docstrings trip docutils section checks
suppress_warnings = ['docutils']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'datalad-perturb extension'
copyright = u'2025-{}, datalad-perturb developers'.format(
    datetime.datetime.now().year)
author = u'datalad-perturb developers'

version = datalad_perturb.__version__
release = version

language = 'en'
exclude_patterns = []
pygments_style = 'sphinx'

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'pandas': ('https://pandas.pydata.org/docs/', None),
}

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_split_index = True
html_show_sourcelink = False

