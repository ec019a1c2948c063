"""Config package"""