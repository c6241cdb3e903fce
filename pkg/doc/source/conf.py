# -*- coding: utf-8 -*-
#
# EpiFlow documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing
# dir. All configuration values have a default; only the ones differing from
# it are set here.

import sys, os

# autodoc imports the package from the source checkout
if os.path.exists("../.."):
    sys.path.insert(0, os.path.abspath('../..'))

# -- General configuration -----------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.doctest']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'EpiFlow'
copyright = u'2021-Today, The EpiFlow Authors'

# The short X.Y version and the full version.
version = '0.3'
release = '0.3.1'

exclude_patterns = ['build']
pygments_style = 'sphinx'

# -- Options for HTML output ---------------------------------------------------

html_theme = 'nature'
html_static_path = []
htmlhelp_basename = 'EpiFlowdoc'

# -- Options for LaTeX output --------------------------------------------------

latex_documents = [
  ('index', 'EpiFlow.tex', u'EpiFlow Documentation',
   u'The EpiFlow Authors', 'manual'),
]

# -- Options for manual page output --------------------------------------------

man_pages = [
    ('index', 'epiflow', u'EpiFlow Documentation',
     [u'The EpiFlow Authors'], 1)
]
