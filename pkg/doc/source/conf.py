# Sphinx configuration for the epcfusion documentation.

import os
import sys

sys.path.insert(0, os.path.abspath('../..'))

from epcfusion import __version__  # noqa: E402

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.autosummary',
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'pandas': ('https://pandas.pydata.org/docs', None),
}

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'epcfusion'
copyright = '2026, epcfusion developers'
version = '.'.join(__version__.split('.')[:2])
release = __version__

exclude_patterns = []
add_module_names = True
pygments_style = 'sphinx'
autoclass_content = 'both'
autodoc_member_order = 'bysource'

html_theme = 'alabaster'
html_title = '{0} Documentation'.format(project)
html_last_updated_fmt = '%b %d, %Y'
html_show_sourcelink = False
htmlhelp_basename = 'epcfusiondoc'

rst_prolog = '''
.. |NAME| replace:: epcfusion
'''
