"""
dwdt package initialization
"""
