"""Workers package"""