"""
dwdt libs package initialization
"""
