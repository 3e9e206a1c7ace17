# sosdetect/matrices/__init__.py
# !/usr/bin/env python3
