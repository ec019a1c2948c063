"""Learning package"""
