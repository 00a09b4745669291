import java.util.Locale;

public class GreetingTool {
    private static final String DEFAULT_NAME = "world";

    public static void main(String[] args) {
        String name = args.length > 0 ? args[0] : DEFAULT_NAME;
        String greeting = buildGreeting(name);
        System.out.println(greeting);
    }

    static String buildGreeting(String name) {
        StringBuilder sb = new StringBuilder();
        sb.append("Hello, ");
        sb.append(name.trim());
        sb.append('!');
        return sb.toString().toUpperCase(Locale.ROOT).charAt(0) + sb.substring(1);
    }
}
