# -*- coding: utf-8 -*-

__title__ = 'porowave'
__version__ = '0.3.0'
__author__ = 'porowave developers'
__contact__ = 'porowave@users.noreply.github.com'
__license__ = 'MIT'


# Version synonym
VERSION = __version__
