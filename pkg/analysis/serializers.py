from rest_framework import serializers

REPORT_COLUMNS = ['epsilon', 'P', 't', 'l1', 'l2', 'linf', 'runtime_s', 'steps', 'error']


class ErrorReportSerializer(serializers.Serializer):
    """
    One CSV row of a comparison sweep
    """
    epsilon = serializers.FloatField()
    P = serializers.IntegerField(source='order', min_value=0)
    t = serializers.FloatField()
    l1 = serializers.FloatField()
    l2 = serializers.FloatField()
    linf = serializers.FloatField()
    runtime_s = serializers.FloatField()
    steps = serializers.IntegerField(min_value=0)
    error = serializers.CharField(allow_blank=True)

