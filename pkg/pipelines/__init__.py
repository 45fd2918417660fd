"""
dwdt pipelines package initialization
"""
